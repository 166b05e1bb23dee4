#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "objslam/exploration.hpp"
#include "objslam/pipeline.hpp"
#include "objslam/scene.hpp"
#include "objslam/topo_map.hpp"

using nlohmann::json;
using namespace objslam;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void spill(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw IoError("short write to " + path);
}

void emit(const std::optional<std::string>& path, const std::string& text) {
  if (path)
    spill(*path, text);
  else
    std::fputs(text.c_str(), stdout);
}

std::vector<std::string> split_labels(const std::string& csv) {
  std::vector<std::string> labels;
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ','))
    if (!item.empty()) labels.push_back(item);
  return labels;
}

std::vector<TopoNode> topo_nodes_from(const ObjectMapFile& map) {
  std::vector<TopoNode> nodes;
  nodes.reserve(map.objects.size());
  for (const auto& o : map.objects) {
    TopoNode n;
    n.id = o.id;
    n.label = o.label;
    n.t = o.t;
    n.theta = o.theta;
    n.s = o.s;
    nodes.push_back(std::move(n));
  }
  return nodes;
}

json vec3_json(const Eigen::Vector3d& v) {
  return json::array({canon9(v.x()), canon9(v.y()), canon9(v.z())});
}

std::string match_result_json(const MatchResult& r) {
  json j;
  j["pairs"] = json::array();
  for (const auto& [a, b] : r.pairs) j["pairs"].push_back({a, b});
  j["rho"] = canon9(r.rho);
  if (r.transform) {
    j["transform"] = {{"s", canon9(r.transform->s)},
                      {"yaw", canon9(r.transform->yaw)},
                      {"t", vec3_json(r.transform->t)}};
    j["inliers"] = json::array();
    for (const auto& [a, b] : r.inliers) j["inliers"].push_back({a, b});
    j["residual"] = canon9(r.residual);
  } else {
    j["transform"] = nullptr;
  }
  return j.dump(2) + "\n";
}

// Scene files carry a table; map files carry objects+provenance.
ObjectMapFile gt_from_path(const std::string& path) {
  json j = json::parse(slurp(path), nullptr, false);
  if (j.is_discarded()) throw SchemaError(path + ": not valid JSON");
  if (j.is_object() && j.contains("table")) return gt_map_from_scene(read_scene_json(path));
  return read_map_json(path);
}

PipelineConfig load_config(const std::optional<std::string>& config_path,
                           const std::optional<std::uint64_t>& seed) {
  PipelineConfig cfg = config_path ? config_from_json_text(slurp(*config_path))
                                   : PipelineConfig{};
  if (seed) cfg.seed = *seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"object-slam backend: association, mapping, matching, exploration"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON file of pipeline overrides");
  app.add_option("--seed", seed, "override the pipeline seed");

  // gen-scene
  auto* gen = app.add_subcommand("gen-scene", "generate a synthetic table scene")->fallthrough();
  std::string gen_out;
  int gen_objects = 6;
  std::string gen_labels;
  double table_x = 0.6, table_y = 0.45, texture = 2.0;
  double noise_px = 0, noise_depth = 0, noise_seg = 0;
  std::optional<std::string> gen_sequence;
  int gen_frames = 60;
  double gen_dropout = 0;
  gen->add_option("--out", gen_out, "scene JSON path")->required();
  gen->add_option("--objects", gen_objects, "object count")->check(CLI::PositiveNumber);
  gen->add_option("--labels", gen_labels, "comma-separated label pool");
  gen->add_option("--table-x", table_x, "table half extent, x")->check(CLI::PositiveNumber);
  gen->add_option("--table-y", table_y, "table half extent, y")->check(CLI::PositiveNumber);
  gen->add_option("--texture", texture, "surface points per square centimeter");
  gen->add_option("--noise-px", noise_px, "detection corner noise, pixels");
  gen->add_option("--noise-depth", noise_depth, "point depth noise, meters");
  gen->add_option("--noise-seg", noise_seg, "segment rotation noise, degrees");
  gen->add_option("--sequence", gen_sequence, "also render an orbit sequence to this JSONL");
  gen->add_option("--frames", gen_frames, "sequence length")->check(CLI::PositiveNumber);
  gen->add_option("--dropout", gen_dropout, "per-detection dropout probability");

  // associate
  auto* assoc = app.add_subcommand("associate", "run data association over a sequence")->fallthrough();
  std::string assoc_in;
  std::optional<std::string> assoc_out;
  assoc->add_option("--in", assoc_in, "frames JSONL")->required();
  assoc->add_option("--out", assoc_out, "report JSON path (stdout when omitted)");

  // map
  auto* mapc = app.add_subcommand("map", "build an object map from a sequence")->fallthrough();
  std::string map_in, map_out;
  std::optional<std::string> map_report;
  mapc->add_option("--in", map_in, "frames JSONL")->required();
  mapc->add_option("--out", map_out, "map JSON path")->required();
  mapc->add_option("--report", map_report, "also write the association report here");

  // match
  auto* match = app.add_subcommand("match", "match two object maps")->fallthrough();
  std::string match_a, match_b;
  std::optional<std::string> match_out;
  match->add_option("--map1", match_a, "source map JSON")->required();
  match->add_option("--map2", match_b, "target map JSON")->required();
  match->add_option("--out", match_out, "result JSON path (stdout when omitted)");

  // explore
  auto* expl = app.add_subcommand("explore", "active exploration over a scene")->fallthrough();
  std::string expl_scene, expl_policy = "nbv";
  int expl_steps = 10;
  std::optional<std::string> expl_trace, expl_map;
  expl->add_option("--scene", expl_scene, "scene JSON")->required();
  expl->add_option("--policy", expl_policy, "nbv | random | coverage | init");
  expl->add_option("--steps", expl_steps, "post-init observation budget")
      ->check(CLI::NonNegativeNumber);
  expl->add_option("--trace", expl_trace, "write the per-observation trace CSV here");
  expl->add_option("--map", expl_map, "write the final map JSON here");

  // eval
  auto* eval = app.add_subcommand("eval", "score a map against ground truth")->fallthrough();
  std::string eval_map_path, eval_gt;
  std::optional<std::string> eval_out;
  eval->add_option("--map", eval_map_path, "map JSON")->required();
  eval->add_option("--gt", eval_gt, "scene JSON or map JSON ground truth")->required();
  eval->add_option("--out", eval_out, "metrics JSON path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    PipelineConfig cfg = load_config(config_path, seed);

    if (gen->parsed()) {
      SceneGenConfig sc;
      sc.n_objects = gen_objects;
      sc.table.half_x = table_x;
      sc.table.half_y = table_y;
      sc.texture = texture;
      sc.seed = seed ? *seed : cfg.seed;
      if (!gen_labels.empty()) sc.labels = split_labels(gen_labels);
      SimScene scene = generate_scene(sc);
      scene.noise_px = noise_px;
      scene.noise_depth = noise_depth;
      scene.noise_seg_deg = noise_seg;
      write_scene_json(gen_out, scene);
      if (gen_sequence)
        write_frames_jsonl(*gen_sequence, generate_sequence(scene, gen_frames, gen_dropout));
      return 0;
    }

    if (assoc->parsed()) {
      MappingResult res = run_mapping(read_frames_jsonl(assoc_in), cfg);
      emit(assoc_out, association_reports_to_json_text(res.reports, res.map));
      return 0;
    }

    if (mapc->parsed()) {
      MappingResult res = run_mapping(read_frames_jsonl(map_in), cfg);
      write_map_json(map_out, res.file);
      if (map_report) spill(*map_report, association_reports_to_json_text(res.reports, res.map));
      return 0;
    }

    if (match->parsed()) {
      MatchConfig mc;
      mc.seed = cfg.seed;
      TopoGraph g1 = build_topo_map(topo_nodes_from(read_map_json(match_a)), mc.k_nn, mc.d_max);
      TopoGraph g2 = build_topo_map(topo_nodes_from(read_map_json(match_b)), mc.k_nn, mc.d_max);
      emit(match_out, match_result_json(match_maps(g1, g2, mc)));
      return 0;
    }

    if (expl->parsed()) {
      SimScene scene = read_scene_json(expl_scene);
      ExploreResult r = explore(scene, policy_from_string(expl_policy), cfg, expl_steps);
      if (expl_trace) spill(*expl_trace, trace_to_csv(r.trace));
      if (expl_map) write_map_json(*expl_map, r.file);
      json j;
      j["policy"] = expl_policy;
      j["observations"] = r.trace.size();
      j["steps_taken"] = r.steps_taken;
      j["stopped_early"] = r.stopped_early;
      j["objects"] = r.file.objects.size();
      if (!r.trace.empty()) {
        const MetricsReport& m = r.trace.back().metrics;
        j["final"] = {{"matched", m.matched},
                      {"misses", m.misses},
                      {"extras", m.extras},
                      {"mean_cde_cm", canon9(m.mean_cde_cm)},
                      {"mean_iou_3d", canon9(m.mean_iou_3d)}};
      }
      std::fputs((j.dump(2) + "\n").c_str(), stdout);
      return 0;
    }

    if (eval->parsed()) {
      MetricsReport rep = eval_map(read_map_json(eval_map_path), gt_from_path(eval_gt));
      emit(eval_out, metrics_to_json_text(rep));
      return 0;
    }
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 2;
  }
  return 0;
}
