#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "objslam/association.hpp"
#include "objslam/geometry.hpp"

namespace objslam {

// Input that fails validation (bad field, out-of-order frames, bad schema).
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem-level failure (missing file, unwritable path).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Detection {
  std::string label;
  BBox2D bbox;
  double confidence = 1.0;
};

struct FramePoint {
  double u = 0, v = 0;               // pixel
  Eigen::Vector3d xyz = {0, 0, 0};   // world frame
};

struct Frame {
  std::int64_t frame_id = 0;
  double timestamp = 0;
  CameraIntrinsics K;
  Pose T_cw;  // world -> camera
  std::vector<Detection> detections;
  std::vector<FramePoint> points;
  std::vector<LineSegment2D> segments;
};

// Round a double to 9 significant digits and back; every number we serialize
// passes through this, so write-then-read-then-write is byte-identical.
double canon9(double v);

// One JSON object per line. Validation: strictly increasing frame_id, pixels
// inside the image, orthonormal rotation (1e-6), valid finite boxes. Errors
// carry the line number and offending field.
std::vector<Frame> read_frames_jsonl(const std::string& path);
void write_frames_jsonl(const std::string& path, const std::vector<Frame>& frames);

// Splits a frame into per-detection locals: a point (or segment midpoint)
// belongs to every detection box containing it.
std::vector<LocalObject> locals_from_frame(const Frame& frame);

}  // namespace objslam
