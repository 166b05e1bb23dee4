#include "objslam/scene.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "objslam/frame.hpp"
#include "objslam/rng.hpp"

namespace objslam {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& what) { throw SchemaError("scene: " + what); }

double num(const json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_number())
    fail(std::string("missing or non-numeric field '") + field + "'");
  double v = j[field].get<double>();
  if (!std::isfinite(v)) fail(std::string("non-finite field '") + field + "'");
  return v;
}

Eigen::Vector3d vec3_from(const json& j, const char* field) {
  if (!j.is_array() || j.size() != 3) fail(std::string(field) + " must be a 3-array");
  Eigen::Vector3d v;
  for (int k = 0; k < 3; ++k) {
    if (!j[k].is_number() || !std::isfinite(j[k].get<double>()))
      fail(std::string(field) + " has a non-finite entry");
    v[k] = j[k].get<double>();
  }
  return v;
}

json vec3_json(const Eigen::Vector3d& v) {
  return json::array({canon9(v.x()), canon9(v.y()), canon9(v.z())});
}

}  // namespace

SimScene read_scene_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) fail("invalid JSON");

  SimScene scene;
  if (!j.contains("seed") || !j["seed"].is_number_unsigned()) fail("missing unsigned 'seed'");
  scene.seed = j["seed"].get<std::uint64_t>();
  scene.noise_px = j.contains("noise_px") ? num(j, "noise_px") : 0.0;
  scene.noise_depth = j.contains("noise_depth") ? num(j, "noise_depth") : 0.0;
  scene.noise_seg_deg = j.contains("noise_seg_deg") ? num(j, "noise_seg_deg") : 0.0;
  if (scene.noise_px < 0 || scene.noise_depth < 0 || scene.noise_seg_deg < 0)
    fail("noise levels must be non-negative");

  if (!j.contains("table") || !j["table"].is_object()) fail("missing object 'table'");
  const json& t = j["table"];
  scene.table.cx = num(t, "cx");
  scene.table.cy = num(t, "cy");
  scene.table.half_x = num(t, "half_x");
  scene.table.half_y = num(t, "half_y");
  scene.table.z = num(t, "z");
  if (scene.table.half_x <= 0 || scene.table.half_y <= 0) fail("table half extents must be positive");

  if (!j.contains("objects") || !j["objects"].is_array()) fail("missing array 'objects'");
  for (const auto& oj : j["objects"]) {
    GtObject o;
    if (!oj.contains("label") || !oj["label"].is_string()) fail("object missing string 'label'");
    o.label = oj["label"].get<std::string>();
    if (!oj.contains("kind") || !oj["kind"].is_string()) fail("object missing string 'kind'");
    std::string kind = oj["kind"].get<std::string>();
    if (kind == "cube")
      o.kind = ModelKind::Cube;
    else if (kind == "cylinder")
      o.kind = ModelKind::Quadric;
    else
      fail("object 'kind' must be 'cube' or 'cylinder'");
    o.t = vec3_from(oj.contains("t") ? oj["t"] : json(), "object t");
    o.theta = num(oj, "theta");
    o.s = vec3_from(oj.contains("s") ? oj["s"] : json(), "object s");
    if (o.s.minCoeff() <= 0) fail("object scale must be positive");
    o.texture = num(oj, "texture");
    if (o.texture < 0) fail("object texture density must be non-negative");
    if (std::abs(o.t.z() - (scene.table.z + o.s.z())) > 1e-6)
      fail("object does not rest on the table (t.z != table.z + s.z)");
    scene.objects.push_back(std::move(o));
  }
  return scene;
}

void write_scene_json(const std::string& path, const SimScene& scene) {
  json j;
  j["seed"] = scene.seed;
  j["noise_px"] = canon9(scene.noise_px);
  j["noise_depth"] = canon9(scene.noise_depth);
  j["noise_seg_deg"] = canon9(scene.noise_seg_deg);
  j["table"] = {{"cx", canon9(scene.table.cx)},
                {"cy", canon9(scene.table.cy)},
                {"half_x", canon9(scene.table.half_x)},
                {"half_y", canon9(scene.table.half_y)},
                {"z", canon9(scene.table.z)}};
  j["objects"] = json::array();
  for (const auto& o : scene.objects)
    j["objects"].push_back({{"label", o.label},
                            {"kind", o.kind == ModelKind::Cube ? "cube" : "cylinder"},
                            {"t", vec3_json(o.t)},
                            {"theta", canon9(o.theta)},
                            {"s", vec3_json(o.s)},
                            {"texture", canon9(o.texture)}});
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

SimScene generate_scene(const SceneGenConfig& cfg) {
  if (cfg.n_objects < 0) throw std::invalid_argument("generate_scene: negative object count");
  if (cfg.labels.empty()) throw std::invalid_argument("generate_scene: empty label pool");

  SimScene scene;
  scene.table = cfg.table;
  scene.seed = cfg.seed;
  auto eng = make_engine(cfg.seed, 11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int i = 0; i < cfg.n_objects; ++i) {
    GtObject o;
    o.label = cfg.labels[std::uniform_int_distribution<std::size_t>(0, cfg.labels.size() - 1)(eng)];
    o.kind = model_kind_for_label(o.label);
    if (o.kind == ModelKind::Cube) {
      o.s.x() = 0.03 + 0.07 * unit(eng);
      o.s.y() = 0.03 + 0.07 * unit(eng);
      o.s.z() = 0.03 + 0.09 * unit(eng);
    } else {
      double r = 0.025 + 0.035 * unit(eng);
      o.s = Eigen::Vector3d(r, r, 0.04 + 0.08 * unit(eng));
    }
    o.theta = normalize_yaw(-M_PI / 2 + M_PI * unit(eng));
    o.texture = cfg.texture;

    double margin = std::max(o.s.x(), o.s.y()) + 0.02;
    double r_i = std::hypot(o.s.x(), o.s.y());
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      double x = cfg.table.cx + (2 * unit(eng) - 1) * std::max(cfg.table.half_x - margin, 0.0);
      double y = cfg.table.cy + (2 * unit(eng) - 1) * std::max(cfg.table.half_y - margin, 0.0);
      bool clear = true;
      for (const auto& other : scene.objects) {
        double r_j = std::hypot(other.s.x(), other.s.y());
        if (std::hypot(x - other.t.x(), y - other.t.y()) <= r_i + r_j + 0.03) {
          clear = false;
          break;
        }
      }
      if (clear) {
        o.t = Eigen::Vector3d(x, y, cfg.table.z + o.s.z());
        placed = true;
      }
    }
    if (!placed)
      throw std::invalid_argument("generate_scene: table too crowded for requested object count");
    scene.objects.push_back(std::move(o));
  }
  return scene;
}

}  // namespace objslam
