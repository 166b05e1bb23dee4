#include "objslam/association.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <tuple>

namespace objslam {

namespace {

// Deterministic stride subsample used when a local exceeds the per-test cap.
std::vector<Eigen::Vector3d> stride_subsample(const std::vector<Eigen::Vector3d>& pts,
                                              std::size_t cap) {
  if (pts.size() <= cap) return pts;
  std::vector<Eigen::Vector3d> out;
  out.reserve(cap);
  for (std::size_t k = 0; k < cap; ++k) out.push_back(pts[k * pts.size() / cap]);
  return out;
}

// 10 um quantization; revisiting a camera pose replays the exact same surface
// draw, and letting those duplicates re-enter the reservoir would evict the
// points that carry the other faces.
std::uint64_t point_key(const Eigen::Vector3d& p) {
  auto q = [](double v) {
    return static_cast<std::uint64_t>(std::llround(v * 1e5) + (1ll << 20)) & ((1ull << 21) - 1);
  };
  return q(p.x()) << 42 | q(p.y()) << 21 | q(p.z());
}

void reservoir_add(GlobalObject& g, const Eigen::Vector3d& p, std::size_t cap,
                   std::mt19937_64& rng) {
  if (!g.point_keys.insert(point_key(p)).second) return;  // exact re-observation
  if (g.points.size() < cap) {
    g.points.push_back(p);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, g.points_seen);
    std::size_t j = pick(rng);
    if (j < cap) g.points[j] = p;
  }
  ++g.points_seen;
}

Eigen::Vector3d history_mean(const std::vector<Eigen::Vector3d>& h) {
  Eigen::Vector3d m = Eigen::Vector3d::Zero();
  for (const auto& c : h) m += c;
  return h.empty() ? m : Eigen::Vector3d(m / double(h.size()));
}

void absorb(GlobalObject& g, const LocalObject& l, const CameraIntrinsics& K, const Pose& T_cw,
            const AssociationConfig& cfg, std::mt19937_64& rng) {
  ++g.label_votes[l.label];
  ++g.observations;
  for (const auto& p : l.points) reservoir_add(g, p, cfg.subsample_cap, rng);
  if (!l.points.empty()) g.centroid_history.push_back(l.centroid());
  g.last_boxes.emplace_back(l.frame_id, l.bbox);
  std::sort(g.last_boxes.begin(), g.last_boxes.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  if (g.last_boxes.size() > 2) g.last_boxes.erase(g.last_boxes.begin(), g.last_boxes.end() - 2);
  g.contexts.push_back(ObservationContext{l.frame_id, K, T_cw, l.segments});
  if (g.contexts.size() > cfg.max_contexts) g.contexts.erase(g.contexts.begin());
}

// Merge b into a (a keeps its id); caller removes b.
void merge_into(GlobalObject& a, GlobalObject& b, const AssociationConfig& cfg,
                std::mt19937_64& rng) {
  for (const auto& [label, n] : b.label_votes) a.label_votes[label] += n;
  a.observations += b.observations;
  std::size_t before = a.points_seen;
  for (const auto& p : b.points) reservoir_add(a, p, cfg.subsample_cap, rng);
  a.points_seen = before + b.points_seen;  // count b's dropped points too
  a.point_keys.insert(b.point_keys.begin(), b.point_keys.end());
  a.centroid_history.insert(a.centroid_history.end(), b.centroid_history.begin(),
                            b.centroid_history.end());
  a.last_boxes.insert(a.last_boxes.end(), b.last_boxes.begin(), b.last_boxes.end());
  std::sort(a.last_boxes.begin(), a.last_boxes.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  if (a.last_boxes.size() > 2) a.last_boxes.erase(a.last_boxes.begin(), a.last_boxes.end() - 2);
  a.contexts.insert(a.contexts.end(), b.contexts.begin(), b.contexts.end());
  std::sort(a.contexts.begin(), a.contexts.end(),
            [](const auto& x, const auto& y) { return x.frame_id < y.frame_id; });
  if (a.contexts.size() > cfg.max_contexts)
    a.contexts.erase(a.contexts.begin(), a.contexts.end() - cfg.max_contexts);
  if (!a.estimate && b.estimate) {
    a.estimate = b.estimate;
    a.points_at_estimate = b.points_at_estimate;
  }
}

}  // namespace

Eigen::Vector3d LocalObject::centroid() const {
  if (points.empty()) throw std::invalid_argument("LocalObject::centroid: no points");
  Eigen::Vector3d m = Eigen::Vector3d::Zero();
  for (const auto& p : points) m += p;
  return m / double(points.size());
}

std::string GlobalObject::majority_label() const {
  std::string best;
  int best_n = -1;
  for (const auto& [label, n] : label_votes) {  // map order: ties go to the low key
    if (n > best_n) {
      best_n = n;
      best = label;
    }
  }
  return best;
}

GlobalObject* ObjectMap::find(std::int64_t id) {
  for (auto& g : objects)
    if (g.id == id) return &g;
  return nullptr;
}

const GlobalObject* ObjectMap::find(std::int64_t id) const {
  for (const auto& g : objects)
    if (g.id == id) return &g;
  return nullptr;
}

std::optional<double> projected_iou(const GlobalObject& g, const BBox2D& bbox,
                                    const CameraIntrinsics& K, const Pose& T_cw) {
  bool any = false;
  BBox2D box{};
  for (const auto& p : g.points) {
    auto px = project_point(p, K, T_cw);
    if (!px) continue;
    if (!any) {
      box = BBox2D{px->x(), px->y(), px->x(), px->y()};
      any = true;
    } else {
      box.xmin = std::min(box.xmin, px->x());
      box.ymin = std::min(box.ymin, px->y());
      box.xmax = std::max(box.xmax, px->x());
      box.ymax = std::max(box.ymax, px->y());
    }
  }
  if (!any) return std::nullopt;
  return bbox_iou(box.clamped(K), bbox);
}

std::optional<double> motion_iou(const GlobalObject& g, const LocalObject& l) {
  const BBox2D* b1 = nullptr;  // frame t-1
  const BBox2D* b2 = nullptr;  // frame t-2
  for (const auto& [frame, box] : g.last_boxes) {
    if (frame == l.frame_id - 1) b1 = &box;
    if (frame == l.frame_id - 2) b2 = &box;
  }
  if (!b1 || !b2) return std::nullopt;
  BBox2D pred{2 * b1->xmin - b2->xmin, 2 * b1->ymin - b2->ymin, 2 * b1->xmax - b2->xmax,
              2 * b1->ymax - b2->ymax};
  if (!pred.valid()) return std::nullopt;
  return bbox_iou(pred, l.bbox);
}

AssociationReport associate_frame(ObjectMap& map, const std::vector<LocalObject>& locals,
                                  const CameraIntrinsics& K, const Pose& T_cw,
                                  const AssociationConfig& cfg) {
  AssociationReport report;
  if (!locals.empty()) report.frame_id = locals.front().frame_id;

  const std::int64_t spawn_floor = map.next_id;  // this frame's spawns are not candidates
  std::set<std::int64_t> taken;

  for (std::size_t i = 0; i < locals.size(); ++i) {
    const LocalObject& l = locals[i];
    LocalDecision decision;
    decision.local_index = i;

    std::vector<Eigen::Vector3d> lpts = stride_subsample(l.points, cfg.subsample_cap);

    for (auto& g : map.objects) {
      if (g.id >= spawn_floor) break;
      if (g.majority_label() != l.label) continue;

      CandidateDecision c;
      c.global_id = g.id;
      c.m_iou = motion_iou(g, l);
      bool motion_ok = c.m_iou && *c.m_iou >= cfg.iou_motion_min;

      if (cfg.iou_only) {
        c.eligible = motion_ok;
        decision.candidates.push_back(c);
        continue;
      }

      auto piou = projected_iou(g, l.bbox, K, T_cw);
      c.p_iou = piou ? *piou : -1;
      if (!piou || *piou < cfg.iou_project_min) {
        decision.candidates.push_back(c);
        continue;
      }

      bool arm = motion_ok;
      if (!arm && !l.points.empty()) {
        c.st = single_t_test(g.centroid_history, l.centroid(), cfg.alpha);
        if (c.st == TestResult::Accept) {
          arm = true;
        } else if (c.st == TestResult::DegenerateVariance) {
          c.st_fallback = true;
          arm = (history_mean(g.centroid_history) - l.centroid()).norm() <
                cfg.degenerate_dist_max;
        }
      }
      if (!arm) {
        c.np = np_test_3d(lpts, g.points, cfg.alpha);
        arm = c.np == TestResult::Accept;
      }
      c.eligible = arm;
      decision.candidates.push_back(c);
    }

    // highest-IoU eligible candidate not already matched this frame
    const CandidateDecision* best = nullptr;
    for (const auto& c : decision.candidates) {
      if (!c.eligible || taken.count(c.global_id)) continue;
      double rank = cfg.iou_only ? *c.m_iou : c.p_iou;
      double best_rank = best ? (cfg.iou_only ? *best->m_iou : best->p_iou) : -2;
      if (!best || rank > best_rank) best = &c;
    }

    if (best) {
      GlobalObject* g = map.find(best->global_id);
      absorb(*g, l, K, T_cw, cfg, map.rng);
      taken.insert(best->global_id);
      decision.matched_global = best->global_id;
    } else if (!l.points.empty()) {
      GlobalObject g;
      g.id = map.next_id++;
      absorb(g, l, K, T_cw, cfg, map.rng);
      map.objects.push_back(std::move(g));
      decision.spawned_global = map.objects.back().id;
    }
    report.locals.push_back(std::move(decision));
  }

  if (!cfg.iou_only) report.merges = merge_duplicates(map, cfg);
  return report;
}

std::vector<MergeRecord> merge_duplicates(ObjectMap& map, const AssociationConfig& cfg) {
  std::vector<MergeRecord> merges;
  std::vector<bool> alive(map.objects.size(), true);

  // Nearest pairs first: a fresh spawn sitting between two same-label globals
  // must heal into the closer one, and id order would hand it to whichever
  // came first.
  struct Pair {
    std::size_t i, j;
    double dist;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < map.objects.size(); ++i)
    for (std::size_t j = i + 1; j < map.objects.size(); ++j) {
      if (map.objects[i].majority_label() != map.objects[j].majority_label()) continue;
      double dist = (history_mean(map.objects[i].centroid_history) -
                     history_mean(map.objects[j].centroid_history))
                        .norm();
      if (dist <= cfg.merge_distance_max) pairs.push_back({i, j, dist});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return a.dist != b.dist ? a.dist < b.dist : std::tie(a.i, a.j) < std::tie(b.i, b.j);
  });

  for (const auto& [i, j, dist0] : pairs) {
    if (!alive[i] || !alive[j]) continue;
    GlobalObject& a = map.objects[i];
    GlobalObject& b = map.objects[j];
    // recheck: an earlier merge may have moved a's centroid
    double dist =
        (history_mean(a.centroid_history) - history_mean(b.centroid_history)).norm();
    if (dist > cfg.merge_distance_max) continue;

    TestResult r = double_t_test(a.centroid_history, b.centroid_history, cfg.alpha);
    // Histories too short for a pooled sd get the same distance rescue as
    // zero-variance ones; otherwise fresh one-frame duplicates never heal.
    bool no_sd = r == TestResult::DegenerateVariance || r == TestResult::NotApplicable;
    bool merge = r == TestResult::Accept || (no_sd && dist < cfg.degenerate_dist_max);
    if (!merge) continue;
    merge_into(a, b, cfg, map.rng);
    merges.push_back(MergeRecord{a.id, b.id});
    alive[j] = false;
  }

  if (!merges.empty()) {
    std::vector<GlobalObject> kept;
    kept.reserve(map.objects.size() - merges.size());
    for (std::size_t i = 0; i < map.objects.size(); ++i)
      if (alive[i]) kept.push_back(std::move(map.objects[i]));
    map.objects = std::move(kept);
  }
  return merges;
}

}  // namespace objslam
