#include "objslam/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace objslam {

namespace {
constexpr double kPi = std::numbers::pi;
}

Pose Pose::compose(const Pose& other) const {
  Pose out;
  out.R = R * other.R;
  out.t = R * other.t + t;
  return out;
}

Pose Pose::inverse() const {
  Pose out;
  out.R = R.transpose();
  out.t = -(R.transpose() * t);
  return out;
}

bool is_rotation(const Eigen::Matrix3d& R, double tol) {
  if (!R.allFinite()) return false;
  Eigen::Matrix3d err = R.transpose() * R - Eigen::Matrix3d::Identity();
  return err.norm() <= tol && R.determinant() > 0;
}

bool BBox2D::valid() const {
  return std::isfinite(xmin) && std::isfinite(ymin) && std::isfinite(xmax) &&
         std::isfinite(ymax) && xmin <= xmax && ymin <= ymax;
}

BBox2D BBox2D::clamped(const CameraIntrinsics& K) const {
  auto clampv = [](double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); };
  BBox2D out;
  out.xmin = clampv(xmin, 0.0, double(K.width));
  out.xmax = clampv(xmax, 0.0, double(K.width));
  out.ymin = clampv(ymin, 0.0, double(K.height));
  out.ymax = clampv(ymax, 0.0, double(K.height));
  return out;
}

double bbox_iou(const BBox2D& a, const BBox2D& b) {
  if (!a.valid() || !b.valid()) throw std::invalid_argument("bbox_iou: invalid box");
  double ix = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  double iy = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  if (ix <= 0 || iy <= 0) return 0.0;
  double inter = ix * iy;
  double uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return inter / uni;
}

double segment_angle(const LineSegment2D& s) {
  double dx = s.b.x() - s.a.x();
  double dy = s.b.y() - s.a.y();
  if (!std::isfinite(dx) || !std::isfinite(dy))
    throw std::invalid_argument("segment_angle: non-finite segment");
  if (dx == 0.0 && dy == 0.0) throw std::invalid_argument("segment_angle: zero-length segment");
  if (dy < 0.0 || (dy == 0.0 && dx < 0.0)) {
    dx = -dx;
    dy = -dy;
  }
  double a = std::atan2(dy, dx);  // dy >= 0, and dy == 0 implies dx > 0, so a in [0, pi)
  return a;
}

double line_angle_diff(double a, double b) {
  double d = std::fabs(a - b);
  if (d > kPi) d = std::fmod(d, kPi);
  return std::min(d, kPi - d);
}

Eigen::Matrix3d yaw_rotation(double theta) {
  double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix3d R;
  R << c, -s, 0, s, c, 0, 0, 0, 1;
  return R;
}

double normalize_yaw(double theta) {
  double t = std::fmod(theta + kPi / 2, kPi);
  if (t < 0) t += kPi;
  return t - kPi / 2;
}

Eigen::Matrix4d QuadricModel::Q() const {
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
  q(0, 0) = s.x() * s.x();
  q(1, 1) = s.y() * s.y();
  q(2, 2) = s.z() * s.z();
  q(3, 3) = -1.0;
  return q;
}

std::array<Eigen::Vector3d, 8> cube_vertices(const CubeModel& c) {
  Eigen::Matrix3d R = yaw_rotation(c.theta);
  std::array<Eigen::Vector3d, 8> out;
  for (int k = 0; k < 8; ++k) {
    Eigen::Vector3d p((k & 1) ? c.s.x() : -c.s.x(), (k & 2) ? c.s.y() : -c.s.y(),
                      (k & 4) ? c.s.z() : -c.s.z());
    out[k] = R * p + c.t;
  }
  return out;
}

const std::array<std::array<int, 2>, 12>& cube_edges() {
  static const std::array<std::array<int, 2>, 12> kEdges = {{{0, 1},
                                                             {0, 2},
                                                             {0, 4},
                                                             {1, 3},
                                                             {1, 5},
                                                             {2, 3},
                                                             {2, 6},
                                                             {3, 7},
                                                             {4, 5},
                                                             {4, 6},
                                                             {5, 7},
                                                             {6, 7}}};
  return kEdges;
}

std::optional<Eigen::Vector2d> project_point(const Eigen::Vector3d& p_world,
                                             const CameraIntrinsics& K, const Pose& T_cw) {
  if (!p_world.allFinite()) throw std::invalid_argument("project_point: non-finite point");
  Eigen::Vector3d q = T_cw.apply(p_world);
  if (q.z() < kEpsZ) return std::nullopt;
  return Eigen::Vector2d(K.fx * q.x() / q.z() + K.cx, K.fy * q.y() / q.z() + K.cy);
}

std::optional<BBox2D> project_bbox(std::span<const Eigen::Vector3d> points,
                                   const CameraIntrinsics& K, const Pose& T_cw) {
  bool any = false;
  BBox2D box;
  for (const auto& p : points) {
    auto px = project_point(p, K, T_cw);
    if (!px) continue;
    if (!any) {
      box = BBox2D{px->x(), px->y(), px->x(), px->y()};
      any = true;
    } else {
      box.xmin = std::min(box.xmin, px->x());
      box.ymin = std::min(box.ymin, px->y());
      box.xmax = std::max(box.xmax, px->x());
      box.ymax = std::max(box.ymax, px->y());
    }
  }
  if (!any) return std::nullopt;
  return box.clamped(K);
}

double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
  if (poly.size() < 3) return 0.0;
  double s = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    s += p.x() * q.y() - q.x() * p.y();
  }
  return std::fabs(s) * 0.5;
}

// Sutherland-Hodgman; both polygons convex, clip polygon CCW.
std::vector<Eigen::Vector2d> convex_clip(const std::vector<Eigen::Vector2d>& subject,
                                         const std::vector<Eigen::Vector2d>& clip) {
  std::vector<Eigen::Vector2d> out = subject;
  for (size_t i = 0; i < clip.size() && !out.empty(); ++i) {
    const Eigen::Vector2d a = clip[i];
    const Eigen::Vector2d b = clip[(i + 1) % clip.size()];
    Eigen::Vector2d e = b - a;
    auto inside = [&](const Eigen::Vector2d& p) {
      return e.x() * (p.y() - a.y()) - e.y() * (p.x() - a.x()) >= -1e-12;
    };
    auto intersect = [&](const Eigen::Vector2d& p, const Eigen::Vector2d& q) {
      Eigen::Vector2d d = q - p;
      double denom = e.x() * d.y() - e.y() * d.x();
      double t = denom == 0 ? 0.0 : (e.x() * (a.y() - p.y()) - e.y() * (a.x() - p.x())) / denom;
      return Eigen::Vector2d(p + t * d);
    };
    std::vector<Eigen::Vector2d> in;
    in.swap(out);
    for (size_t j = 0; j < in.size(); ++j) {
      const Eigen::Vector2d& cur = in[j];
      const Eigen::Vector2d& prev = in[(j + in.size() - 1) % in.size()];
      bool cin = inside(cur), pin = inside(prev);
      if (cin) {
        if (!pin) out.push_back(intersect(prev, cur));
        out.push_back(cur);
      } else if (pin) {
        out.push_back(intersect(prev, cur));
      }
    }
  }
  return out;
}

std::vector<Eigen::Vector2d> cube_footprint(const CubeModel& c) {
  double co = std::cos(c.theta), si = std::sin(c.theta);
  auto corner = [&](double x, double y) {
    return Eigen::Vector2d(c.t.x() + co * x - si * y, c.t.y() + si * x + co * y);
  };
  return {corner(c.s.x(), c.s.y()), corner(-c.s.x(), c.s.y()), corner(-c.s.x(), -c.s.y()),
          corner(c.s.x(), -c.s.y())};
}

static double footprint_overlap_area(const CubeModel& a, const CubeModel& b) {
  return polygon_area(convex_clip(cube_footprint(a), cube_footprint(b)));
}

double footprint_iou(const CubeModel& a, const CubeModel& b) {
  double inter = footprint_overlap_area(a, b);
  double ua = polygon_area(cube_footprint(a));
  double ub = polygon_area(cube_footprint(b));
  double uni = ua + ub - inter;
  if (uni <= 0) return 0.0;
  return inter / uni;
}

double box_iou_3d(const CubeModel& a, const CubeModel& b) {
  double inter_area = footprint_overlap_area(a, b);
  double zlo = std::max(a.t.z() - a.s.z(), b.t.z() - b.s.z());
  double zhi = std::min(a.t.z() + a.s.z(), b.t.z() + b.s.z());
  double dz = zhi - zlo;
  if (dz <= 0 || inter_area <= 0) return 0.0;
  double inter = inter_area * dz;
  double uni = a.volume() + b.volume() - inter;
  if (uni <= 0) return 0.0;
  return inter / uni;
}

}  // namespace objslam
