#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "objslam/association.hpp"
#include "objslam/frame.hpp"
#include "objslam/parameterization.hpp"
#include "objslam/scene.hpp"

namespace objslam {

struct PipelineConfig {
  AssociationConfig assoc;
  ParamConfig param;
  int n_param = 10;        // re-parameterization cadence, frames
  std::uint64_t seed = 0;  // master seed; fans out to reservoir and per-object fits
};

// Applies a flat JSON object of overrides onto the defaults. Unknown keys and
// out-of-range values raise SchemaError.
PipelineConfig config_from_json_text(const std::string& text);

// FNV-1a 64 of the canonical serialized config, as 16 hex digits.
std::string config_hash(const PipelineConfig& cfg);

struct MapObjectRecord {
  std::int64_t id = 0;
  std::string label;
  ModelKind kind = ModelKind::Cube;
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  double theta = 0;
  Eigen::Vector3d s = Eigen::Vector3d::Ones();
  int inlier_count = 0;
  bool under_observed = false;
};

struct ObjectMapFile {
  int schema_version = 1;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<MapObjectRecord> objects;
};

ObjectMapFile read_map_json(const std::string& path);
void write_map_json(const std::string& path, const ObjectMapFile& map);

// (Re)fits one global object in place: isolation forest + cube/quadric fit
// when enough points exist, centroid/half-range fallback otherwise. The fit
// seed is derived from (cfg.seed, object id, points seen) so replays agree.
void refit_object(GlobalObject& g, const PipelineConfig& cfg);
void refit_all(ObjectMap& map, const PipelineConfig& cfg);

// Snapshot of the live map as a serializable file record.
ObjectMapFile map_file_from(const ObjectMap& map, const PipelineConfig& cfg);

struct MappingResult {
  ObjectMap map;
  ObjectMapFile file;
  std::vector<AssociationReport> reports;
};

// Associates every frame in order, re-parameterizing all objects every
// cfg.n_param frames and once at the end. Per-object fit failures downgrade to
// the fallback estimate; the run always completes.
MappingResult run_mapping(const std::vector<Frame>& frames, const PipelineConfig& cfg);

struct ObjectEvalRow {
  std::int64_t map_id = 0;
  int gt_index = 0;
  std::string label;
  double cde_cm = 0;
  std::optional<double> yae_deg;  // empty when either side is a quadric
  double iou_top = 0;
  double iou_3d = 0;
};

struct MetricsReport {
  int map_objects = 0;
  int gt_objects = 0;
  int matched = 0;
  int misses = 0;
  int extras = 0;
  double mean_cde_cm = 0;
  double mean_yae_deg = 0;  // over cube-cube matches only
  double mean_iou_top = 0;
  double mean_iou_3d = 0;
  std::vector<ObjectEvalRow> per_object;
};

// Yaw distance in degrees modulo the box symmetry: minimum over the four
// equivalent yaws (quarter-turn steps swap footprint extents).
double yaw_error_deg(double theta_est, double theta_gt);

// Greedy nearest-centroid matching with a 0.5 m gate, then per-pair CDE (cm),
// symmetry-aware YAE (deg), top-view 2D IoU, and 3D IoU.
MetricsReport eval_map(const ObjectMapFile& map, const ObjectMapFile& gt);

ObjectMapFile gt_map_from_scene(const SimScene& scene);

std::string metrics_to_json_text(const MetricsReport& report);
std::string association_reports_to_json_text(const std::vector<AssociationReport>& reports,
                                             const ObjectMap& final_map);

}  // namespace objslam
