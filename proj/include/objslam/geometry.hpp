#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <span>
#include <vector>

namespace objslam {

// Camera-frame depth below this counts as behind the camera.
inline constexpr double kEpsZ = 1e-6;

// Rigid transform, x_out = R * x_in + t.
struct Pose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  Pose compose(const Pose& other) const;  // this ∘ other
  Pose inverse() const;
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return R * p + t; }
};

bool is_rotation(const Eigen::Matrix3d& R, double tol = 1e-9);

struct CameraIntrinsics {
  double fx = 525.0, fy = 525.0, cx = 319.5, cy = 239.5;
  int width = 640, height = 480;
};

struct BBox2D {
  double xmin = 0, ymin = 0, xmax = 0, ymax = 0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  bool valid() const;
  bool contains(double x, double y) const {
    return x >= xmin && x <= xmax && y >= ymin && y <= ymax;
  }
  BBox2D clamped(const CameraIntrinsics& K) const;
};

// Intersection over union of two axis-aligned boxes. Zero-area union yields 0.
double bbox_iou(const BBox2D& a, const BBox2D& b);

struct LineSegment2D {
  Eigen::Vector2d a = Eigen::Vector2d::Zero();
  Eigen::Vector2d b = Eigen::Vector2d::Zero();

  Eigen::Vector2d midpoint() const { return 0.5 * (a + b); }
  double length() const { return (b - a).norm(); }
};

// Undirected angle of a segment, folded into [0, pi). Exactly reversal-invariant:
// the direction is canonicalized before atan2.
double segment_angle(const LineSegment2D& s);

// Distance between two undirected line angles (each in [0, pi)), result in [0, pi/2].
double line_angle_diff(double a, double b);

// Gravity-aligned box: yaw theta about world +z, half-extents s = (s_l, s_w, s_h).
struct CubeModel {
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  double theta = 0;
  Eigen::Vector3d s = Eigen::Vector3d::Ones();

  double volume() const { return 8.0 * s.x() * s.y() * s.z(); }
};

// Axis-aligned ellipsoid (orientation fixed at identity). The dual form in the
// object frame is Q = diag(s_l^2, s_w^2, s_h^2, -1).
struct QuadricModel {
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Vector3d s = Eigen::Vector3d::Ones();

  Eigen::Matrix4d Q() const;
  double volume() const { return 8.0 * s.x() * s.y() * s.z(); }
};

Eigen::Matrix3d yaw_rotation(double theta);

// Yaw canonicalized into [-pi/2, pi/2).
double normalize_yaw(double theta);

// The 8 corners. Vertex k sits at ((k&1)?+s_l:-s_l, (k&2)?+s_w:-s_w, (k&4)?+s_h:-s_h)
// in the object frame, then rotated by yaw and translated.
std::array<Eigen::Vector3d, 8> cube_vertices(const CubeModel& c);

// 12 edges as index pairs into the cube_vertices order (pairs differ in one sign bit).
const std::array<std::array<int, 2>, 12>& cube_edges();

// Pinhole projection of a world point. nullopt = behind the camera (z < kEpsZ).
// Non-finite input throws std::invalid_argument.
std::optional<Eigen::Vector2d> project_point(const Eigen::Vector3d& p_world,
                                             const CameraIntrinsics& K, const Pose& T_cw);

// Bounding box of the visible projections, clamped to the image rectangle
// [0,width]x[0,height]. nullopt when every point is behind the camera.
std::optional<BBox2D> project_bbox(std::span<const Eigen::Vector3d> points,
                                   const CameraIntrinsics& K, const Pose& T_cw);

// Convex polygon helpers (vertices CCW). Used by the top-view / 3D box overlap metrics.
double polygon_area(const std::vector<Eigen::Vector2d>& poly);
std::vector<Eigen::Vector2d> convex_clip(const std::vector<Eigen::Vector2d>& subject,
                                         const std::vector<Eigen::Vector2d>& clip);

// Top-view footprint of a cube, CCW.
std::vector<Eigen::Vector2d> cube_footprint(const CubeModel& c);

// IoU of the top-view footprints.
double footprint_iou(const CubeModel& a, const CubeModel& b);

// IoU of two gravity-aligned boxes: footprint overlap area times vertical overlap.
double box_iou_3d(const CubeModel& a, const CubeModel& b);

}  // namespace objslam
