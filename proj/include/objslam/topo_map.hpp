#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "objslam/geometry.hpp"

namespace objslam {

struct TopoNode {
  std::int64_t id = 0;
  std::string label;
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  double theta = 0;
  Eigen::Vector3d s = Eigen::Vector3d::Ones();

  double volume() const { return 8.0 * s.x() * s.y() * s.z(); }
};

// Undirected; u < v canonically. alpha is the angle in [0, pi/2] between the
// horizontal edge direction and the lower-id endpoint's yaw line (the paper's
// "angle of two objects" is undefined; this choice rotates with the map, so
// angle differences survive map-frame rotations).
struct TopoEdge {
  std::int64_t u = 0;
  std::int64_t v = 0;
  double d = 0;
  double alpha = 0;
};

struct TopoGraph {
  std::vector<TopoNode> nodes;  // sorted by id
  std::vector<TopoEdge> edges;
  std::vector<std::vector<int>> adjacency;  // node index -> sorted neighbor indices

  int node_index(std::int64_t id) const;  // -1 when absent
};

// k-nearest-neighbor graph over centroids, edges capped at d_max meters.
TopoGraph build_topo_map(std::vector<TopoNode> nodes, int k_nn = 4, double d_max = 5.0);

// One random-walk step record: the visited object's label and volume, plus its
// distance and yaw-line angle measured from the walk's origin object.
struct WalkEntry {
  std::string label;
  double volume = 0;
  double d = 0;
  double alpha = 0;
};

struct Descriptor {
  std::int64_t origin = 0;
  std::vector<std::vector<WalkEntry>> rows;  // j rows, each up to depth entries
};

// j walks of at most `depth` steps; each step moves to a uniformly random
// not-yet-visited neighbor and dead ends terminate the row early.
Descriptor random_walk_descriptor(const TopoGraph& graph, std::int64_t origin, int depth,
                                  int walks, std::uint64_t seed);

struct MatchConfig {
  int k_nn = 4;
  double d_max = 5.0;
  int walk_depth = 4;  // i
  int walks = 20;      // j
  double sigma_d = 0.3;
  double sigma_alpha = 0.3;
  double sigma_s = 0.7;
  int ransac_iters = 200;
  double inlier_scale = 0.2;  // epsilon_in = inlier_scale * rho, meters
  std::uint64_t seed = 0;
};

enum class SimilarityTerms { All, LabelAngle };

// Mean over row pairs of positional per-entry agreement. rho scales a toward
// b (distances by rho, volumes by rho^3); the distance term is normalized by
// sqrt(rho) so that similarity(a, b, rho) == similarity(b, a, 1/rho) exactly.
// LabelAngle drops the distance and volume terms (the scale-free first pass).
double descriptor_similarity(const Descriptor& a, const Descriptor& b, double rho,
                             const MatchConfig& cfg = {},
                             SimilarityTerms terms = SimilarityTerms::All);

// Gravity-aligned similarity transform: y = s * R(yaw) * x + t.
struct MapTransform {
  double s = 1;
  double yaw = 0;
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  Eigen::Matrix3d R() const { return yaw_rotation(yaw); }
  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return s * (R() * x) + t; }
};

// Least-squares yaw-only similarity over correspondences (x -> y) via 2D SVD
// on the centered horizontal coordinates; nullopt when the source points have
// no horizontal spread.
std::optional<MapTransform> solve_yaw_similarity(
    std::span<const std::pair<Eigen::Vector3d, Eigen::Vector3d>> pairs);

struct MatchResult {
  std::vector<std::pair<std::int64_t, std::int64_t>> pairs;  // (g1 id, g2 id)
  double rho = 1;  // scale estimate; transform->s once solved
  std::optional<MapTransform> transform;
  std::vector<std::pair<std::int64_t, std::int64_t>> inliers;
  double inlier_eps = 0;
  double residual = 0;  // mean inlier error after the final solve
};

// Descriptor matching, scale estimation, greedy assignment, and RANSAC
// transform solving between two maps (map1 -> map2). Fewer than 3 pairs (or no
// RANSAC consensus) yields a pairs-only result without a transform.
MatchResult match_maps(const TopoGraph& g1, const TopoGraph& g2, const MatchConfig& cfg = {});

struct RelocResult {
  MapTransform transform;  // query frame -> prior frame
  MatchResult match;
};

// Builds the query graph and matches it against the prior map; nullopt when no
// transform can be recovered.
std::optional<RelocResult> relocalize(const TopoGraph& prior, std::vector<TopoNode> query,
                                      const MatchConfig& cfg = {});

}  // namespace objslam
