#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "objslam/frame.hpp"
#include "objslam/pipeline.hpp"
#include "objslam/scene.hpp"

namespace objslam {

struct CandidateView {
  Pose T_cw;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // camera center, world
  int index = 0;  // stamp in the canonical candidate list; stable under permutation
};

// World->camera pose looking from eye toward target (z forward, y down-ish).
Pose look_at_pose(const Eigen::Vector3d& eye, const Eigen::Vector3d& target);

// 36 candidates: two elevation rings of 16 azimuths on a hemisphere over the
// table, plus the four top-down corner views (indices 32..35).
std::vector<CandidateView> candidate_views(const SimScene& scene);
// The four top-down corner views used as the shared warm-up for every policy.
std::vector<CandidateView> init_views(const SimScene& scene);
// Boustrophedon sweep at fixed height over the table, `stops` poses.
std::vector<CandidateView> coverage_views(const SimScene& scene, int stops = 10);

// Deterministic synthetic camera: detections for unoccluded in-frustum GT
// objects, surface points on camera-facing faces at the object's texture
// density, cube edges clipped to the image (kept at >= 8 px). The draw stream
// depends only on (scene.seed, view pose); frame_id only stamps the output.
Frame simulate_observation(const SimScene& scene, const CandidateView& view,
                           std::int64_t frame_id);

// Orbit sequence around the table with per-detection Bernoulli dropout,
// seeded by scene.seed.
std::vector<Frame> generate_sequence(const SimScene& scene, int n_frames, double dropout);

enum class CellState : unsigned char { Unknown, Free, Occupied };

struct FaceGrid {
  int axis = 0;   // 0=x, 1=y, 2=z
  int sign = 1;   // outward direction along axis; bottom (-z) has no grid
  int nu = 0, nv = 0;
  std::vector<CellState> cells;  // row-major nu*nv
};

// Five-face surface occupancy grid, geometry frozen at creation time.
struct SurfaceGrid {
  CubeModel anchor;
  double cell = 0.01;
  std::array<FaceGrid, 5> faces;

  std::size_t total() const;
  std::size_t count(CellState s) const;
};

SurfaceGrid make_surface_grid(const ObjectEstimate& estimate, double cell = 0.01);

// Points mark their nearest face cell occupied; unoccupied cells whose centers
// face the camera and project into the image become free. unknown->free,
// unknown->occupied, and free->occupied are the only transitions.
void update_grid(SurfaceGrid& grid, std::span<const Eigen::Vector3d> points,
                 const CameraIntrinsics& K, const Pose& T_cw);

// Binary entropy in bits; throws std::invalid_argument outside [0,1].
double grid_entropy(double p);
// (H_obj, normalized H) with p = 0.99 occupied, 0.01 free, 0.5 unknown.
std::pair<double, double> object_entropy(const SurfaceGrid& grid);

// exp(-z^2/2) of the z-scored latest volume: 1 at the history mean, ->0 far
// from it. Fewer than 3 entries -> 0.5; zero variance with >= 3 -> 1.
double volume_convergence_p(std::span<const double> history);

struct ObjectProgress {
  SurfaceGrid grid;
  std::vector<double> volume_history;
  bool done = false;
};

struct ExplorationState {
  ObjectMap map;
  std::map<std::int64_t, ObjectProgress> progress;
  Eigen::Vector3d camera_pos = Eigen::Vector3d::Zero();
  int steps = 0;  // post-init observations taken
};

struct FeatureVector {
  double h_obj = 0;
  double h_bar = 1;
  double r_o = 0;
  double r_iou = 0;
  double volume = 0;
  double s = 1;  // 1 while the object still needs exploration, 0 once done
};

// Per-object features under a candidate view; r_iou is the mean bbox IoU of
// this object's projected box against every other estimated object's box.
FeatureVector feature_vector(const ExplorationState& state, std::int64_t object_id,
                             const CandidateView& view);

// f = sum over visible, unfinished objects of (1-R_o)*H_obj + lambda*(H_IoU +
// H_V) with H(p) = -p log2 p, p_IoU = R_IoU/2, p_V from the volume history.
double view_utility(const ExplorationState& state, const CandidateView& view,
                    double lambda = 0.2);

// Argmax of view_utility; ties break by smaller camera motion from the current
// pose, then by lower candidate stamp.
const CandidateView& select_nbv(const ExplorationState& state,
                                std::span<const CandidateView> candidates);

enum class Policy { Nbv, Random, Coverage, Init };

Policy policy_from_string(const std::string& name);  // throws std::invalid_argument

struct StepTrace {
  int observation = 0;  // 0-based over all observations, init included
  bool init_phase = false;
  int view_index = -1;
  double utility = 0;  // selected utility (nbv policy only)
  int objects = 0;
  int done_count = 0;
  double total_entropy = 0;
  double mean_normalized_entropy = 0;  // mean H-bar over tracked objects
  std::vector<std::pair<std::int64_t, double>> object_entropies;  // (id, H-bar)
  MetricsReport metrics;
};

struct ExploreResult {
  ObjectMap map;
  ObjectMapFile file;
  std::vector<StepTrace> trace;
  int steps_taken = 0;      // post-init observations
  bool stopped_early = false;
};

// Four-corner init for every policy, then per-policy view selection for up to
// max_steps further observations; each observation runs association,
// re-parameterization, and grid updates. Bit-reproducible for a fixed
// (scene, policy, cfg).
ExploreResult explore(const SimScene& scene, Policy policy, const PipelineConfig& cfg,
                      int max_steps = 10);

std::string trace_to_csv(const std::vector<StepTrace>& trace);

}  // namespace objslam
