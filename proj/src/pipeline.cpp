#include "objslam/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <tuple>

#include <json.hpp>

#include "objslam/rng.hpp"

namespace objslam {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& what) { throw SchemaError(what); }

json vec3_json(const Eigen::Vector3d& v) {
  return json::array({canon9(v.x()), canon9(v.y()), canon9(v.z())});
}

Eigen::Vector3d vec3_from(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) fail("map: " + field + " must be a 3-array");
  Eigen::Vector3d v;
  for (int k = 0; k < 3; ++k) {
    if (!j[k].is_number() || !std::isfinite(j[k].get<double>()))
      fail("map: " + field + " has a non-finite entry");
    v[k] = j[k].get<double>();
  }
  return v;
}

json canonical_config_json(const PipelineConfig& c) {
  json j;
  j["alpha"] = canon9(c.assoc.alpha);
  j["iou_motion_min"] = canon9(c.assoc.iou_motion_min);
  j["iou_project_min"] = canon9(c.assoc.iou_project_min);
  j["merge_distance_max"] = canon9(c.assoc.merge_distance_max);
  j["subsample_cap"] = c.assoc.subsample_cap;
  j["degenerate_dist_max"] = canon9(c.assoc.degenerate_dist_max);
  j["max_contexts"] = c.assoc.max_contexts;
  j["iou_only"] = c.assoc.iou_only;
  j["t_trees"] = c.param.t_trees;
  j["psi"] = c.param.psi;
  j["score_threshold"] = canon9(c.param.score_threshold);
  j["s_min"] = canon9(c.param.s_min);
  j["orientation_samples"] = c.param.orientation_samples;
  j["xi_deg"] = canon9(c.param.xi_deg);
  j["refine_max_iters"] = c.param.refine_max_iters;
  j["refine_rel_tol"] = canon9(c.param.refine_rel_tol);
  j["min_points"] = c.param.min_points;
  j["n_param"] = c.n_param;
  j["seed"] = c.seed;
  return j;
}

}  // namespace

PipelineConfig config_from_json_text(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) fail("config: invalid JSON");
  if (!j.is_object()) fail("config: expected a JSON object");

  PipelineConfig c;
  for (const auto& [key, val] : j.items()) {
    auto number = [&](double lo, double hi) {
      if (!val.is_number()) fail("config: '" + key + "' must be a number");
      double v = val.get<double>();
      if (!std::isfinite(v) || v < lo || v > hi) fail("config: '" + key + "' out of range");
      return v;
    };
    auto count = [&](std::int64_t lo, std::int64_t hi) {
      if (!val.is_number_integer()) fail("config: '" + key + "' must be an integer");
      std::int64_t v = val.get<std::int64_t>();
      if (v < lo || v > hi) fail("config: '" + key + "' out of range");
      return v;
    };
    if (key == "alpha")
      c.assoc.alpha = number(1e-6, 0.5);
    else if (key == "iou_motion_min")
      c.assoc.iou_motion_min = number(0, 1);
    else if (key == "iou_project_min")
      c.assoc.iou_project_min = number(0, 1);
    else if (key == "merge_distance_max")
      c.assoc.merge_distance_max = number(0, 100);
    else if (key == "subsample_cap")
      c.assoc.subsample_cap = static_cast<std::size_t>(count(10, 1000000));
    else if (key == "degenerate_dist_max")
      c.assoc.degenerate_dist_max = number(0, 100);
    else if (key == "max_contexts")
      c.assoc.max_contexts = static_cast<std::size_t>(count(1, 10000));
    else if (key == "iou_only") {
      if (!val.is_boolean()) fail("config: 'iou_only' must be a boolean");
      c.assoc.iou_only = val.get<bool>();
    } else if (key == "t_trees")
      c.param.t_trees = static_cast<int>(count(1, 10000));
    else if (key == "psi")
      c.param.psi = static_cast<int>(count(2, 100000));
    else if (key == "score_threshold")
      c.param.score_threshold = number(0, 1);
    else if (key == "s_min")
      c.param.s_min = number(1e-6, 10);
    else if (key == "orientation_samples")
      c.param.orientation_samples = static_cast<int>(count(1, 100000));
    else if (key == "xi_deg")
      c.param.xi_deg = number(1e-3, 90);
    else if (key == "refine_max_iters")
      c.param.refine_max_iters = static_cast<int>(count(0, 100000));
    else if (key == "refine_rel_tol")
      c.param.refine_rel_tol = number(0, 1);
    else if (key == "min_points")
      c.param.min_points = static_cast<std::size_t>(count(3, 1000000));
    else if (key == "n_param")
      c.n_param = static_cast<int>(count(1, 1000000));
    else if (key == "seed") {
      if (!val.is_number_unsigned() && !val.is_number_integer())
        fail("config: 'seed' must be an integer");
      c.seed = val.get<std::uint64_t>();
    } else
      fail("config: unknown key '" + key + "'");
  }
  return c;
}

std::string config_hash(const PipelineConfig& cfg) {
  std::string canon = canonical_config_json(cfg).dump();
  std::uint64_t h = fnv1a64(canon.data(), canon.size());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ObjectMapFile read_map_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) fail("map: invalid JSON");

  ObjectMapFile m;
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
    fail("map: missing integer 'schema_version'");
  m.schema_version = j["schema_version"].get<int>();
  if (m.schema_version != 1) fail("map: unsupported schema_version");
  if (!j.contains("provenance") || !j["provenance"].is_object())
    fail("map: missing object 'provenance'");
  const json& prov = j["provenance"];
  if (!prov.contains("config_hash") || !prov["config_hash"].is_string())
    fail("map: provenance missing string 'config_hash'");
  m.config_hash = prov["config_hash"].get<std::string>();
  if (!prov.contains("seed") || !prov["seed"].is_number_unsigned())
    fail("map: provenance missing unsigned 'seed'");
  m.seed = prov["seed"].get<std::uint64_t>();

  if (!j.contains("objects") || !j["objects"].is_array()) fail("map: missing array 'objects'");
  std::set<std::int64_t> ids;
  for (const auto& oj : j["objects"]) {
    MapObjectRecord r;
    if (!oj.contains("id") || !oj["id"].is_number_integer()) fail("map: object missing integer 'id'");
    r.id = oj["id"].get<std::int64_t>();
    if (!ids.insert(r.id).second) fail("map: duplicate object id");
    if (!oj.contains("label") || !oj["label"].is_string()) fail("map: object missing string 'label'");
    r.label = oj["label"].get<std::string>();
    if (!oj.contains("model") || !oj["model"].is_string()) fail("map: object missing string 'model'");
    std::string model = oj["model"].get<std::string>();
    if (model == "cube")
      r.kind = ModelKind::Cube;
    else if (model == "quadric")
      r.kind = ModelKind::Quadric;
    else
      fail("map: object 'model' must be 'cube' or 'quadric'");
    r.t = vec3_from(oj.contains("t") ? oj["t"] : json(), "object t");
    if (!oj.contains("theta") || !oj["theta"].is_number() ||
        !std::isfinite(oj["theta"].get<double>()))
      fail("map: object missing finite 'theta'");
    r.theta = oj["theta"].get<double>();
    r.s = vec3_from(oj.contains("s") ? oj["s"] : json(), "object s");
    if (r.s.minCoeff() <= 0) fail("map: object scale must be positive");
    if (!oj.contains("inlier_count") || !oj["inlier_count"].is_number_integer() ||
        oj["inlier_count"].get<int>() < 0)
      fail("map: object missing non-negative integer 'inlier_count'");
    r.inlier_count = oj["inlier_count"].get<int>();
    if (!oj.contains("under_observed") || !oj["under_observed"].is_boolean())
      fail("map: object missing boolean 'under_observed'");
    r.under_observed = oj["under_observed"].get<bool>();
    m.objects.push_back(std::move(r));
  }
  return m;
}

void write_map_json(const std::string& path, const ObjectMapFile& map) {
  json j;
  j["schema_version"] = map.schema_version;
  j["provenance"] = {{"config_hash", map.config_hash}, {"seed", map.seed}};
  j["objects"] = json::array();
  for (const auto& r : map.objects)
    j["objects"].push_back({{"id", r.id},
                            {"label", r.label},
                            {"model", r.kind == ModelKind::Cube ? "cube" : "quadric"},
                            {"t", vec3_json(r.t)},
                            {"theta", canon9(r.theta)},
                            {"s", vec3_json(r.s)},
                            {"inlier_count", r.inlier_count},
                            {"under_observed", r.under_observed}});
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

void refit_object(GlobalObject& g, const PipelineConfig& cfg) {
  std::string label = g.majority_label();
  if (g.points.size() >= cfg.param.min_points) {
    ParamConfig p = cfg.param;
    p.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(g.id));
    try {
      g.estimate = parameterize(label, g.points, g.contexts, p);
      g.points_at_estimate = g.points_seen;
      return;
    } catch (const std::exception&) {
      // fall through to the centroid/half-range fallback
    }
  }
  ObjectEstimate fallback;
  fallback.kind = model_kind_for_label(label);
  if (g.points.size() >= 4) {
    auto [t, s] = estimate_centroid_scale(g.points, cfg.param.s_min);
    fallback.t = t;
    fallback.s = s;
  } else if (!g.points.empty()) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& p : g.points) mean += p;
    fallback.t = mean / double(g.points.size());
    fallback.s = Eigen::Vector3d::Constant(cfg.param.s_min);
  } else if (!g.centroid_history.empty()) {
    fallback.t = g.last_centroid();
    fallback.s = Eigen::Vector3d::Constant(cfg.param.s_min);
  }
  fallback.theta = 0;
  fallback.inlier_count = static_cast<int>(g.points.size());
  fallback.orientation_error = std::numeric_limits<double>::infinity();
  g.estimate = fallback;
  g.points_at_estimate = g.points_seen;
}

void refit_all(ObjectMap& map, const PipelineConfig& cfg) {
  for (auto& g : map.objects) refit_object(g, cfg);
}

ObjectMapFile map_file_from(const ObjectMap& map, const PipelineConfig& cfg) {
  ObjectMapFile file;
  file.config_hash = config_hash(cfg);
  file.seed = cfg.seed;
  for (const auto& g : map.objects) {
    if (!g.estimate) continue;
    const ObjectEstimate& e = *g.estimate;
    MapObjectRecord r;
    r.id = g.id;
    r.label = g.majority_label();
    r.kind = e.kind;
    r.t = e.t;
    r.theta = e.theta;
    r.s = e.s;
    r.inlier_count = e.inlier_count;
    r.under_observed = e.inlier_count < static_cast<int>(cfg.param.min_points);
    file.objects.push_back(std::move(r));
  }
  return file;
}

MappingResult run_mapping(const std::vector<Frame>& frames, const PipelineConfig& cfg) {
  MappingResult result;
  result.map = ObjectMap(mix_seed(cfg.seed, 17));
  std::size_t since_fit = 0;
  for (const auto& frame : frames) {
    auto locals = locals_from_frame(frame);
    result.reports.push_back(
        associate_frame(result.map, locals, frame.K, frame.T_cw, cfg.assoc));
    if (++since_fit >= static_cast<std::size_t>(std::max(cfg.n_param, 1))) {
      refit_all(result.map, cfg);
      since_fit = 0;
    }
  }
  refit_all(result.map, cfg);
  result.file = map_file_from(result.map, cfg);
  return result;
}

double yaw_error_deg(double theta_est, double theta_gt) {
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 4; ++k) {
    double d = theta_est - theta_gt - k * M_PI / 2;
    d = std::remainder(d, 2 * M_PI);
    best = std::min(best, std::abs(d));
  }
  return best * 180.0 / M_PI;
}

MetricsReport eval_map(const ObjectMapFile& map, const ObjectMapFile& gt) {
  MetricsReport rep;
  rep.map_objects = static_cast<int>(map.objects.size());
  rep.gt_objects = static_cast<int>(gt.objects.size());

  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < map.objects.size(); ++i)
    for (std::size_t k = 0; k < gt.objects.size(); ++k) {
      double d = (map.objects[i].t - gt.objects[k].t).norm();
      if (d <= 0.5) pairs.emplace_back(d, i, k);
    }
  std::sort(pairs.begin(), pairs.end());

  std::vector<bool> map_used(map.objects.size(), false), gt_used(gt.objects.size(), false);
  double sum_cde = 0, sum_yae = 0, sum_top = 0, sum_3d = 0;
  int yae_count = 0;
  for (const auto& [d, i, k] : pairs) {
    if (map_used[i] || gt_used[k]) continue;
    map_used[i] = gt_used[k] = true;
    const MapObjectRecord& e = map.objects[i];
    const MapObjectRecord& g = gt.objects[k];
    ObjectEvalRow row;
    row.map_id = e.id;
    row.gt_index = static_cast<int>(k);
    row.label = g.label;
    row.cde_cm = 100.0 * d;
    CubeModel eb{e.t, e.theta, e.s};
    CubeModel gb{g.t, g.theta, g.s};
    row.iou_top = footprint_iou(eb, gb);
    row.iou_3d = box_iou_3d(eb, gb);
    if (e.kind == ModelKind::Cube && g.kind == ModelKind::Cube) {
      row.yae_deg = yaw_error_deg(e.theta, g.theta);
      sum_yae += *row.yae_deg;
      ++yae_count;
    }
    sum_cde += row.cde_cm;
    sum_top += row.iou_top;
    sum_3d += row.iou_3d;
    rep.per_object.push_back(std::move(row));
  }
  rep.matched = static_cast<int>(rep.per_object.size());
  rep.misses = rep.gt_objects - rep.matched;
  rep.extras = rep.map_objects - rep.matched;
  if (rep.matched > 0) {
    sum_cde /= rep.matched;
    sum_top /= rep.matched;
    sum_3d /= rep.matched;
    rep.mean_cde_cm = sum_cde;
    rep.mean_iou_top = sum_top;
    rep.mean_iou_3d = sum_3d;
  }
  if (yae_count > 0) rep.mean_yae_deg = sum_yae / yae_count;
  return rep;
}

ObjectMapFile gt_map_from_scene(const SimScene& scene) {
  ObjectMapFile file;
  file.config_hash = "ground-truth";
  file.seed = scene.seed;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const GtObject& o = scene.objects[i];
    MapObjectRecord r;
    r.id = static_cast<std::int64_t>(i);
    r.label = o.label;
    r.kind = o.kind;
    r.t = o.t;
    r.theta = o.theta;
    r.s = o.s;
    r.inlier_count = 0;
    r.under_observed = false;
    file.objects.push_back(std::move(r));
  }
  return file;
}

std::string metrics_to_json_text(const MetricsReport& rep) {
  json j;
  j["map_objects"] = rep.map_objects;
  j["gt_objects"] = rep.gt_objects;
  j["matched"] = rep.matched;
  j["misses"] = rep.misses;
  j["extras"] = rep.extras;
  j["mean_cde_cm"] = canon9(rep.mean_cde_cm);
  j["mean_yae_deg"] = canon9(rep.mean_yae_deg);
  j["mean_iou_top"] = canon9(rep.mean_iou_top);
  j["mean_iou_3d"] = canon9(rep.mean_iou_3d);
  j["per_object"] = json::array();
  for (const auto& row : rep.per_object) {
    json r;
    r["map_id"] = row.map_id;
    r["gt_index"] = row.gt_index;
    r["label"] = row.label;
    r["cde_cm"] = canon9(row.cde_cm);
    if (row.yae_deg)
      r["yae_deg"] = canon9(*row.yae_deg);
    else
      r["yae_deg"] = nullptr;
    r["iou_top"] = canon9(row.iou_top);
    r["iou_3d"] = canon9(row.iou_3d);
    j["per_object"].push_back(std::move(r));
  }
  return j.dump(2) + "\n";
}

std::string association_reports_to_json_text(const std::vector<AssociationReport>& reports,
                                             const ObjectMap& final_map) {
  json j;
  j["frames"] = json::array();
  for (const auto& rep : reports) {
    int matched = 0, spawned = 0;
    for (const auto& l : rep.locals) {
      if (l.matched_global) ++matched;
      if (l.spawned_global) ++spawned;
    }
    j["frames"].push_back({{"frame_id", rep.frame_id},
                           {"locals", rep.locals.size()},
                           {"matched", matched},
                           {"spawned", spawned},
                           {"merges", rep.merges.size()}});
  }
  j["final_objects"] = json::array();
  for (const auto& g : final_map.objects)
    j["final_objects"].push_back({{"id", g.id},
                                  {"label", g.majority_label()},
                                  {"points_seen", g.points_seen},
                                  {"observations", g.centroid_history.size()}});
  j["final_object_count"] = final_map.objects.size();
  return j.dump(2) + "\n";
}

}  // namespace objslam
