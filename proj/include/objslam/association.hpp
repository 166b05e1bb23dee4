#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "objslam/geometry.hpp"
#include "objslam/parameterization.hpp"
#include "objslam/stats.hpp"

namespace objslam {

// One detection in one frame, already lifted to world-frame points.
struct LocalObject {
  std::string label;
  BBox2D bbox;
  std::vector<Eigen::Vector3d> points;
  std::vector<LineSegment2D> segments;  // 2D segments inside the bbox
  std::int64_t frame_id = 0;

  Eigen::Vector3d centroid() const;  // throws if no points
};

struct GlobalObject {
  std::int64_t id = 0;
  std::map<std::string, int> label_votes;
  std::vector<Eigen::Vector3d> points;  // reservoir, capped at subsample_cap
  std::size_t points_seen = 0;          // distinct points ever offered
  std::unordered_set<std::uint64_t> point_keys;  // quantized keys of those points
  int observations = 0;                 // absorptions, re-observations included
  std::vector<Eigen::Vector3d> centroid_history;
  std::vector<std::pair<std::int64_t, BBox2D>> last_boxes;  // two most recent
  std::vector<ObservationContext> contexts;                 // capped, oldest dropped
  std::optional<ObjectEstimate> estimate;
  std::size_t points_at_estimate = 0;  // points_seen when estimate was made

  std::string majority_label() const;  // argmax of votes, ties break low
  Eigen::Vector3d last_centroid() const { return centroid_history.back(); }
};

struct AssociationConfig {
  double alpha = 0.05;
  double iou_motion_min = 0.3;
  double iou_project_min = 0.3;
  double merge_distance_max = 1.0;  // meters, duplicate-merge candidate gate
  std::size_t subsample_cap = 5000;
  double degenerate_dist_max = 0.1;  // meters, zero-variance fallback gate
  std::size_t max_contexts = 20;
  bool iou_only = false;  // baseline: motion-IoU gate only, no merging
  std::uint64_t seed = 0;
};

struct ObjectMap {
  std::vector<GlobalObject> objects;
  std::int64_t next_id = 0;
  std::mt19937_64 rng;

  ObjectMap() : rng(0) {}
  explicit ObjectMap(std::uint64_t seed) : rng(seed) {}

  GlobalObject* find(std::int64_t id);
  const GlobalObject* find(std::int64_t id) const;
};

// IoU of the detection box against the global's points projected into the
// current camera and clamped to the image; nullopt when nothing projects.
std::optional<double> projected_iou(const GlobalObject& g, const BBox2D& bbox,
                                    const CameraIntrinsics& K, const Pose& T_cw);

// Uniform-motion prediction: corner-wise extrapolation of the boxes at t-1 and
// t-2 to frame t; nullopt when either box is missing or the prediction
// degenerates.
std::optional<double> motion_iou(const GlobalObject& g, const LocalObject& l);

struct CandidateDecision {
  std::int64_t global_id = 0;
  double p_iou = -1;            // -1: no projected points
  std::optional<double> m_iou;  // nullopt: prediction not available
  TestResult np = TestResult::NotApplicable;
  TestResult st = TestResult::NotApplicable;
  bool st_fallback = false;  // distance fallback engaged after DegenerateVariance
  bool eligible = false;
};

struct LocalDecision {
  std::size_t local_index = 0;
  std::vector<CandidateDecision> candidates;
  std::optional<std::int64_t> matched_global;
  std::optional<std::int64_t> spawned_global;
};

struct MergeRecord {
  std::int64_t kept_id = 0;
  std::int64_t removed_id = 0;
};

struct AssociationReport {
  std::int64_t frame_id = 0;
  std::vector<LocalDecision> locals;
  std::vector<MergeRecord> merges;
};

// Ensemble association of one frame's detections into the map. A local matches
// a same-label global iff P-IoU >= iou_project_min and at least one of
// {M-IoU >= iou_motion_min, np_test_3d accepts, single_t_test accepts} holds;
// each global absorbs at most one local per frame (highest P-IoU wins) and
// unmatched locals with points spawn new globals. Afterwards same-label global
// pairs within merge_distance_max are merge-tested with the double t-test.
// With cfg.iou_only the gate is the motion-IoU arm alone and merging is off.
AssociationReport associate_frame(ObjectMap& map, const std::vector<LocalObject>& locals,
                                  const CameraIntrinsics& K, const Pose& T_cw,
                                  const AssociationConfig& cfg);

// One pass of double-t duplicate merging over gated same-label pairs; the
// lower id survives. Also called by associate_frame each frame.
std::vector<MergeRecord> merge_duplicates(ObjectMap& map, const AssociationConfig& cfg);

}  // namespace objslam
