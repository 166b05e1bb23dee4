#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "objslam/geometry.hpp"
#include "objslam/parameterization.hpp"

namespace objslam {

// Ground-truth tabletop object. Cylinders reuse the quadric kind and carry
// s = (r, r, half_height).
struct GtObject {
  std::string label;
  ModelKind kind = ModelKind::Cube;
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  double theta = 0;
  Eigen::Vector3d s = Eigen::Vector3d(0.05, 0.05, 0.05);  // half extents
  double texture = 2.0;                                   // surface points per cm^2

  CubeModel box() const { return CubeModel{t, theta, s}; }
};

struct Table {
  double cx = 0, cy = 0;
  double half_x = 0.6, half_y = 0.45;
  double z = 0.75;  // top surface height
};

struct SimScene {
  Table table;
  std::vector<GtObject> objects;
  std::uint64_t seed = 0;
  double noise_px = 0;       // detection corner noise, pixels
  double noise_depth = 0;    // world point noise, meters
  double noise_seg_deg = 0;  // segment rotation noise about its midpoint, degrees
};

SimScene read_scene_json(const std::string& path);
void write_scene_json(const std::string& path, const SimScene& scene);

struct SceneGenConfig {
  int n_objects = 6;
  std::vector<std::string> labels = {"box", "book", "mug", "bottle", "cup", "toy"};
  Table table;
  double texture = 2.0;
  std::uint64_t seed = 0;
};

// Non-overlapping tabletop placement, deterministic in cfg.seed. Labels with a
// quadric model kind become cylinders. Throws if the table cannot fit the
// requested count.
SimScene generate_scene(const SceneGenConfig& cfg);

}  // namespace objslam
