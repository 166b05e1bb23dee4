#include "objslam/parameterization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <stdexcept>

#include "objslam/isolation_forest.hpp"
#include "objslam/rng.hpp"

namespace objslam {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDegPerRad = 180.0 / kPi;

ModelKind kind_from_label(const std::string& label) {
  static const std::set<std::string> kQuadric = {"ball", "bottle", "cup", "vase", "bowl"};
  return kQuadric.count(label) ? ModelKind::Quadric : ModelKind::Cube;
}

// Angles (in [0, pi)) of the cube's projected edges; edges with an endpoint
// behind the camera or with near-zero pixel length are dropped.
std::vector<double> projected_edge_angles(const CubeModel& cube, const CameraIntrinsics& K,
                                          const Pose& T_cw) {
  auto verts = cube_vertices(cube);
  std::array<std::optional<Eigen::Vector2d>, 8> px;
  for (int i = 0; i < 8; ++i) px[i] = project_point(verts[i], K, T_cw);
  std::vector<double> out;
  out.reserve(12);
  for (const auto& e : cube_edges()) {
    if (!px[e[0]] || !px[e[1]]) continue;
    LineSegment2D seg{*px[e[0]], *px[e[1]]};
    if (seg.length() < 1e-9) continue;
    out.push_back(segment_angle(seg));
  }
  return out;
}

std::vector<LineSegment2D> projected_edge_segments(const CubeModel& cube,
                                                   const CameraIntrinsics& K, const Pose& T_cw) {
  auto verts = cube_vertices(cube);
  std::array<std::optional<Eigen::Vector2d>, 8> px;
  for (int i = 0; i < 8; ++i) px[i] = project_point(verts[i], K, T_cw);
  std::vector<LineSegment2D> out;
  out.reserve(12);
  for (const auto& e : cube_edges()) {
    if (!px[e[0]] || !px[e[1]]) continue;
    LineSegment2D seg{*px[e[0]], *px[e[1]]};
    if (seg.length() < 1e-9) continue;
    out.push_back(seg);
  }
  return out;
}

double point_segment_distance(const Eigen::Vector2d& p, const LineSegment2D& s) {
  Eigen::Vector2d d = s.b - s.a;
  double len2 = d.squaredNorm();
  if (len2 <= 0) return (p - s.a).norm();
  double t = (p - s.a).dot(d) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (s.a + t * d)).norm();
}

// Mean squared angular error (deg^2) of segments against nearest projected
// edge, over all frames. Drives the theta coordinate of the refinement.
double angular_objective(const CubeModel& cube, std::span<const ObservationContext> contexts) {
  double sum = 0;
  int count = 0;
  for (const auto& ctx : contexts) {
    if (ctx.segments.empty()) continue;
    auto edge_angles = projected_edge_angles(cube, ctx.K, ctx.T_cw);
    if (edge_angles.empty()) continue;
    for (const auto& seg : ctx.segments) {
      double a = segment_angle(seg);
      double best = std::numeric_limits<double>::infinity();
      for (double ea : edge_angles) best = std::min(best, line_angle_diff(a, ea));
      double deg = best * kDegPerRad;
      sum += deg * deg;
      ++count;
    }
  }
  return count ? sum / count : 0.0;
}

// Mean pixel distance from each projected edge to its nearest near-parallel
// (within 10 degrees) segment. Drives the scale coordinates.
double edge_distance_objective(const CubeModel& cube,
                               std::span<const ObservationContext> contexts) {
  constexpr double kParallelTol = 10.0 / kDegPerRad;
  double sum = 0;
  int count = 0;
  for (const auto& ctx : contexts) {
    if (ctx.segments.empty()) continue;
    auto edges = projected_edge_segments(cube, ctx.K, ctx.T_cw);
    for (const auto& edge : edges) {
      double ea = segment_angle(edge);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& seg : ctx.segments) {
        if (line_angle_diff(segment_angle(seg), ea) > kParallelTol) continue;
        best = std::min(best, point_segment_distance(seg.midpoint(), edge));
      }
      if (std::isfinite(best)) {
        sum += best;
        ++count;
      }
    }
  }
  return count ? sum / count : 0.0;
}

double refine_objective(const CubeModel& cube, std::span<const ObservationContext> contexts) {
  return angular_objective(cube, contexts) + edge_distance_objective(cube, contexts);
}

bool any_near_parallel(const CubeModel& cube, std::span<const ObservationContext> contexts) {
  constexpr double kParallelTol = 10.0 / kDegPerRad;
  for (const auto& ctx : contexts) {
    if (ctx.segments.empty()) continue;
    auto edge_angles = projected_edge_angles(cube, ctx.K, ctx.T_cw);
    for (const auto& seg : ctx.segments) {
      double a = segment_angle(seg);
      for (double ea : edge_angles)
        if (line_angle_diff(a, ea) <= kParallelTol) return true;
    }
  }
  return false;
}

}  // namespace

ModelKind model_kind_for_label(const std::string& label) { return kind_from_label(label); }

double pose_objective(const CubeModel& cube, std::span<const ObservationContext> contexts) {
  return refine_objective(cube, contexts);
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> estimate_centroid_scale(
    std::span<const Eigen::Vector3d> points, double s_min) {
  if (points.size() < 4) throw std::invalid_argument("estimate_centroid_scale: <4 points");
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d mn = points[0], mx = points[0];
  for (const auto& p : points) {
    mean += p;
    mn = mn.cwiseMin(p);
    mx = mx.cwiseMax(p);
  }
  mean /= double(points.size());
  Eigen::Vector3d s = 0.5 * (mx - mn);
  for (int d = 0; d < 3; ++d) s[d] = std::max(s[d], s_min);
  return {mean, s};
}

double alignment_score(const CubeModel& cube, const ObservationContext& ctx, double xi_deg,
                       double* mean_err_out) {
  if (mean_err_out) *mean_err_out = 0;
  if (ctx.segments.empty()) return 0.0;
  auto edge_angles = projected_edge_angles(cube, ctx.K, ctx.T_cw);
  if (edge_angles.empty()) return 0.0;

  const double xi2 = xi_deg * xi_deg;
  int n_pass = 0;
  double err_pass = 0, err_all = 0;
  for (const auto& seg : ctx.segments) {
    double a = segment_angle(seg);
    double best = std::numeric_limits<double>::infinity();
    for (double ea : edge_angles) best = std::min(best, line_angle_diff(a, ea));
    double deg = best * kDegPerRad;
    double e = deg * deg;
    err_all += e;
    if (e < xi2) {
      ++n_pass;
      err_pass += e;
    }
  }
  if (mean_err_out) *mean_err_out = err_all / double(ctx.segments.size());
  if (n_pass == 0) return 0.0;
  double mean_e = err_pass / double(n_pass);
  double score = (double(n_pass) / double(ctx.segments.size())) * (1.0 + 0.1 * (xi_deg - mean_e));
  return std::max(score, 0.0);
}

OrientationResult init_orientation(const CubeModel& base,
                                   std::span<const ObservationContext> contexts, int samples,
                                   double xi_deg) {
  OrientationResult out;
  bool any_segments = false;
  for (const auto& c : contexts)
    if (!c.segments.empty()) any_segments = true;
  if (!any_segments || samples < 1) {
    out.theta = 0;
    out.error = std::numeric_limits<double>::infinity();
    out.no_segments = true;
    return out;
  }

  double best_score = -std::numeric_limits<double>::infinity();
  out.score_history.reserve(samples);
  for (int k = 0; k < samples; ++k) {
    double theta = -kPi / 2 + double(k) * kPi / double(samples);
    CubeModel cand{base.t, theta, base.s};
    double total = 0, err_total = 0;
    for (const auto& ctx : contexts) {
      double mean_err = 0;
      total += alignment_score(cand, ctx, xi_deg, &mean_err);
      err_total += mean_err;
    }
    out.score_history.emplace_back(theta, total);
    if (total > best_score) {
      best_score = total;
      out.theta = theta;
      out.error = err_total;
    }
  }
  return out;
}

CubeModel refine_pose(const CubeModel& init, std::span<const ObservationContext> contexts,
                      const ParamConfig& cfg) {
  if (!any_near_parallel(init, contexts)) return init;

  CubeModel cur = init;
  double obj = refine_objective(cur, contexts);
  double theta_step = kPi / 180.0;
  double s_step = 0.02;

  for (int iter = 0; iter < cfg.refine_max_iters; ++iter) {
    double obj_before = obj;

    bool theta_improved = false;
    for (double cand_theta : {cur.theta + theta_step, cur.theta - theta_step}) {
      CubeModel cand = cur;
      cand.theta = cand_theta;
      double v = refine_objective(cand, contexts);
      if (v < obj) {
        cur = cand;
        obj = v;
        theta_improved = true;
      }
    }
    if (!theta_improved) theta_step *= 0.5;

    bool scale_improved = false;
    for (int d = 0; d < 3; ++d) {
      for (double factor : {1.0 + s_step, 1.0 - s_step}) {
        CubeModel cand = cur;
        cand.s[d] = std::max(cand.s[d] * factor, cfg.s_min);
        double v = refine_objective(cand, contexts);
        if (v < obj) {
          cur = cand;
          obj = v;
          scale_improved = true;
        }
      }
    }
    if (!scale_improved) s_step *= 0.5;

    double denom = std::max(obj_before, 1e-12);
    if ((obj_before - obj) / denom < cfg.refine_rel_tol && iter > 0) break;
  }
  cur.theta = normalize_yaw(cur.theta);
  return cur;
}

ObjectEstimate parameterize(const std::string& label, std::span<const Eigen::Vector3d> points,
                            std::span<const ObservationContext> contexts,
                            const ParamConfig& cfg) {
  if (points.size() < cfg.min_points)
    throw std::invalid_argument("parameterize: too few points");

  int psi = int(std::min<std::size_t>(cfg.psi, points.size()));
  IsolationForest forest = build_forest(points, cfg.t_trees, psi, cfg.seed);
  std::vector<Eigen::Vector3d> inliers =
      filter_outliers(points, forest, cfg.score_threshold, 4);
  auto [t, s] = estimate_centroid_scale(inliers, cfg.s_min);

  ObjectEstimate est;
  est.kind = model_kind_for_label(label);
  est.t = t;
  est.s = s;
  est.inlier_count = int(inliers.size());
  if (est.kind == ModelKind::Quadric) {
    est.theta = 0;
    return est;
  }

  OrientationResult init = init_orientation(CubeModel{t, 0, s}, contexts,
                                            cfg.orientation_samples, cfg.xi_deg);
  est.orientation_error = init.error;
  est.score_history = std::move(init.score_history);
  if (init.no_segments) {
    est.theta = 0;
    return est;
  }
  CubeModel refined = refine_pose(CubeModel{t, init.theta, s}, contexts, cfg);
  est.theta = normalize_yaw(refined.theta);
  est.s = refined.s;
  return est;
}

}  // namespace objslam
