#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "objslam/geometry.hpp"

namespace objslam {

enum class ModelKind { Cube, Quadric };

// Quadric classes: ball, bottle, cup, vase, bowl. Everything else (including
// unrecognized labels) defaults to a cube.
ModelKind model_kind_for_label(const std::string& label);

// One frame's worth of evidence for orientation estimation: the camera and the
// detected segments lying inside the object's bounding box in that frame.
struct ObservationContext {
  std::int64_t frame_id = 0;
  CameraIntrinsics K;
  Pose T_cw;
  std::vector<LineSegment2D> segments;
};

struct ObjectEstimate {
  ModelKind kind = ModelKind::Cube;
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  double theta = 0;  // [-pi/2, pi/2); always 0 for quadrics
  Eigen::Vector3d s = Eigen::Vector3d::Ones();
  int inlier_count = 0;
  double orientation_error = 0;  // accumulated alignment error; +inf when no segments existed
  std::vector<std::pair<double, double>> score_history;  // (theta sample, summed score)

  CubeModel cube() const { return CubeModel{t, theta, s}; }
  QuadricModel quadric() const { return QuadricModel{t, s}; }
  double volume() const { return 8.0 * s.x() * s.y() * s.z(); }
};

struct ParamConfig {
  int t_trees = 100;
  int psi = 256;  // effective subsample = min(psi, |X|)
  double score_threshold = 0.6;
  double s_min = 0.01;
  int orientation_samples = 30;
  double xi_deg = 5.0;
  int refine_max_iters = 50;
  double refine_rel_tol = 1e-4;
  std::size_t min_points = 10;
  std::uint64_t seed = 0;
};

// t = componentwise mean, s = componentwise half-range clamped to s_min.
std::pair<Eigen::Vector3d, Eigen::Vector3d> estimate_centroid_scale(
    std::span<const Eigen::Vector3d> points, double s_min = 0.01);

// Per-frame alignment score of a cube hypothesis against detected segments:
// each segment's error e is the squared angular gap (degrees^2) to the nearest
// projected edge; Score = N_p/N_a * (1 + 0.1*(xi - E(e))) clamped at 0, with
// N_p the segments passing e < xi^2 and E(e) their mean error. mean_err_out,
// if given, receives the mean error over all segments (diagnostic).
double alignment_score(const CubeModel& cube, const ObservationContext& ctx, double xi_deg,
                       double* mean_err_out = nullptr);

struct OrientationResult {
  double theta = 0;
  double error = 0;         // accumulated per-frame error at the winning sample
  bool no_segments = false; // true -> theta fell back to 0, error is +inf
  std::vector<std::pair<double, double>> score_history;
};

// Scores `samples` uniform yaws over [-pi/2, pi/2) and returns the argmax.
OrientationResult init_orientation(const CubeModel& base,
                                   std::span<const ObservationContext> contexts,
                                   int samples = 30, double xi_deg = 5.0);

// Coordinate descent over (theta, s) against the combined angular + edge-to-
// segment pixel distance objective; t stays fixed. Never increases the
// objective; returns the input unchanged when no near-parallel segments exist.
CubeModel refine_pose(const CubeModel& init, std::span<const ObservationContext> contexts,
                      const ParamConfig& cfg = {});

// The objective refine_pose descends (lower is better). Exposed so callers can
// compare competing cube hypotheses on the same evidence.
double pose_objective(const CubeModel& cube, std::span<const ObservationContext> contexts);

// Full pipeline: isolation-forest filtering, centroid/scale, then cube
// orientation (sampling + refinement) or quadric (theta = 0).
ObjectEstimate parameterize(const std::string& label, std::span<const Eigen::Vector3d> points,
                            std::span<const ObservationContext> contexts,
                            const ParamConfig& cfg = {});

}  // namespace objslam
