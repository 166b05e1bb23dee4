#include <doctest.h>

#include <cmath>
#include <random>

#include "objslam/association.hpp"

using namespace objslam;

namespace {

Pose look_at(const Eigen::Vector3d& pos, const Eigen::Vector3d& target) {
  Eigen::Vector3d z = (target - pos).normalized();
  Eigen::Vector3d up = std::abs(z.z()) > 0.99 ? Eigen::Vector3d(1, 0, 0)
                                              : Eigen::Vector3d(0, 0, 1);
  Eigen::Vector3d x = z.cross(up).normalized();
  Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d R_wc;
  R_wc.col(0) = x;
  R_wc.col(1) = y;
  R_wc.col(2) = z;
  return Pose{R_wc.transpose(), -R_wc.transpose() * pos};
}

BBox2D bbox_of(const std::vector<Eigen::Vector3d>& pts, const CameraIntrinsics& K,
               const Pose& T_cw) {
  BBox2D box{};
  bool any = false;
  for (const auto& p : pts) {
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
  REQUIRE(any);
  return box.clamped(K);
}

LocalObject make_local(const std::string& label, const Eigen::Vector3d& center,
                       const Eigen::Vector3d& extent, int n, std::uint64_t seed,
                       std::int64_t frame, const CameraIntrinsics& K, const Pose& T_cw) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  LocalObject l;
  l.label = label;
  l.frame_id = frame;
  l.points.resize(n);
  for (auto& p : l.points)
    p = center + Eigen::Vector3d(u(rng) * extent.x(), u(rng) * extent.y(), u(rng) * extent.z());
  l.bbox = bbox_of(l.points, K, T_cw);
  return l;
}

GlobalObject make_global(std::int64_t id, const std::string& label,
                         const Eigen::Vector3d& center, double jitter, int history_len,
                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, jitter);
  GlobalObject obj;
  obj.id = id;
  obj.label_votes[label] = history_len;
  for (int i = 0; i < history_len; ++i) {
    Eigen::Vector3d c = center + Eigen::Vector3d(g(rng), g(rng), g(rng));
    obj.centroid_history.push_back(c);
    obj.points.push_back(c);
  }
  obj.points_seen = obj.points.size();
  return obj;
}

}  // namespace

TEST_CASE("motion_iou") {
  BBox2D box{100, 100, 200, 180};
  GlobalObject g;

  SUBCASE("static object with identical boxes predicts itself") {
    g.last_boxes = {{0, box}, {1, box}};
    LocalObject l;
    l.frame_id = 2;
    l.bbox = box;
    auto r = motion_iou(g, l);
    REQUIRE(r.has_value());
    CHECK(*r == 1.0);
  }
  SUBCASE("missing box at t-1 is not applicable") {
    g.last_boxes = {{0, box}};
    LocalObject l;
    l.frame_id = 2;
    l.bbox = box;
    CHECK(!motion_iou(g, l).has_value());
    g.last_boxes = {{0, box}, {2, box}};  // t-2 present via frame 0? no: frames 0 and 2
    l.frame_id = 3;
    CHECK(!motion_iou(g, l).has_value());
  }
  SUBCASE("uniform translation extrapolates exactly") {
    BBox2D b2{100, 100, 200, 180};
    BBox2D b1{110, 100, 210, 180};  // +10 px/frame in x
    BBox2D expect{120, 100, 220, 180};
    g.last_boxes = {{0, b2}, {1, b1}};
    LocalObject l;
    l.frame_id = 2;
    l.bbox = expect;
    auto r = motion_iou(g, l);
    REQUIRE(r.has_value());
    CHECK(*r == 1.0);
  }
  SUBCASE("degenerate prediction is not applicable") {
    BBox2D b2{0, 0, 100, 50};
    BBox2D b1{0, 0, 40, 50};  // width collapses faster than it can persist
    g.last_boxes = {{0, b2}, {1, b1}};
    LocalObject l;
    l.frame_id = 2;
    l.bbox = b1;
    CHECK(!motion_iou(g, l).has_value());
  }
}

TEST_CASE("associate_frame") {
  CameraIntrinsics K;
  Pose T_cw = look_at({0, -4, 0.8}, {0, 0, 0.4});
  AssociationConfig cfg;
  cfg.seed = 7;

  SUBCASE("empty map spawns one global per local") {
    ObjectMap map(cfg.seed);
    std::vector<LocalObject> locals = {
        make_local("chair", {-1, 0, 0.4}, {0.3, 0.3, 0.4}, 50, 1, 0, K, T_cw),
        make_local("tvmonitor", {0.2, 0, 0.5}, {0.25, 0.1, 0.2}, 50, 2, 0, K, T_cw),
        make_local("book", {1.2, 0, 0.3}, {0.15, 0.1, 0.03}, 50, 3, 0, K, T_cw)};
    AssociationReport rep = associate_frame(map, locals, K, T_cw, cfg);
    CHECK(map.objects.size() == 3);
    for (const auto& d : rep.locals) {
      CHECK(d.spawned_global.has_value());
      CHECK(!d.matched_global.has_value());
    }
    CHECK(rep.merges.empty());
  }

  SUBCASE("replaying the same static scene keeps the object count") {
    ObjectMap map(cfg.seed);
    for (std::int64_t frame = 0; frame < 3; ++frame) {
      std::vector<LocalObject> locals = {
          make_local("chair", {-1, 0, 0.4}, {0.3, 0.3, 0.4}, 60, 1, frame, K, T_cw),
          make_local("book", {1.2, 0, 0.3}, {0.15, 0.1, 0.03}, 60, 2, frame, K, T_cw)};
      AssociationReport rep = associate_frame(map, locals, K, T_cw, cfg);
      if (frame > 0)
        for (const auto& d : rep.locals) CHECK(d.matched_global.has_value());
    }
    CHECK(map.objects.size() == 2);
    for (const auto& g : map.objects) {
      CHECK(g.centroid_history.size() == 3);
      CHECK(g.contexts.size() == 3);
    }
  }

  SUBCASE("label mismatch is a hard gate") {
    ObjectMap map(cfg.seed);
    auto l0 = make_local("chair", {0, 0, 0.4}, {0.3, 0.3, 0.4}, 50, 1, 0, K, T_cw);
    associate_frame(map, {l0}, K, T_cw, cfg);
    auto l1 = make_local("cup", {0, 0, 0.4}, {0.3, 0.3, 0.4}, 50, 1, 1, K, T_cw);
    AssociationReport rep = associate_frame(map, {l1}, K, T_cw, cfg);
    CHECK(map.objects.size() == 2);
    CHECK(rep.locals[0].candidates.empty());
  }

  SUBCASE("highest projected IoU wins among eligible candidates") {
    // two same-label globals with static motion history, one shifted 5 cm;
    // the motion arm makes both eligible deterministically
    ObjectMap map(cfg.seed);
    auto mk = [&](std::int64_t id, double dx, std::uint64_t seed) {
      auto l = make_local("chair", {dx, 0, 0.4}, {0.3, 0.3, 0.4}, 100, seed, 0, K, T_cw);
      GlobalObject g;
      g.id = id;
      g.label_votes["chair"] = 2;
      g.points = l.points;
      g.points_seen = l.points.size();
      g.centroid_history = {l.centroid()};
      g.last_boxes = {{0, l.bbox}, {1, l.bbox}};
      return g;
    };
    map.objects.push_back(mk(0, 0.0, 1));
    map.objects.push_back(mk(1, 0.05, 2));
    map.next_id = 2;

    auto l = make_local("chair", {0, 0, 0.4}, {0.3, 0.3, 0.4}, 100, 3, 2, K, T_cw);
    AssociationReport rep = associate_frame(map, {l}, K, T_cw, cfg);
    REQUIRE(rep.locals[0].candidates.size() == 2);
    const auto& c0 = rep.locals[0].candidates[0];
    const auto& c1 = rep.locals[0].candidates[1];
    REQUIRE(c0.eligible);
    REQUIRE(c1.eligible);
    CHECK(c0.p_iou > c1.p_iou);
    REQUIRE(rep.locals[0].matched_global.has_value());
    CHECK(*rep.locals[0].matched_global == 0);  // the unshifted twin fits better
    // the losing twin sits 5 cm away with a one-entry history: the post-frame
    // distance rescue folds it into the winner
    REQUIRE(rep.merges.size() == 1);
    CHECK(rep.merges[0].kept_id == 0);
    CHECK(rep.merges[0].removed_id == 1);
    CHECK(map.objects.size() == 1);
  }

  SUBCASE("a local without points can match but never spawns") {
    ObjectMap map(cfg.seed);
    for (std::int64_t frame = 0; frame < 2; ++frame) {
      auto l = make_local("chair", {0, 0, 0.4}, {0.3, 0.3, 0.4}, 60, 1, frame, K, T_cw);
      associate_frame(map, {l}, K, T_cw, cfg);
    }
    REQUIRE(map.objects.size() == 1);

    LocalObject ghost;
    ghost.label = "chair";
    ghost.frame_id = 2;
    ghost.bbox = map.objects[0].last_boxes.back().second;
    AssociationReport rep = associate_frame(map, {ghost}, K, T_cw, cfg);
    CHECK(rep.locals[0].matched_global.has_value());  // motion arm carries it
    CHECK(map.objects.size() == 1);
    CHECK(map.objects[0].centroid_history.size() == 2);  // no centroid appended

    LocalObject orphan;
    orphan.label = "vase";
    orphan.frame_id = 2;
    orphan.bbox = BBox2D{10, 10, 50, 50};
    AssociationReport rep2 = associate_frame(map, {orphan}, K, T_cw, cfg);
    CHECK(!rep2.locals[0].spawned_global.has_value());
    CHECK(map.objects.size() == 1);
  }

  SUBCASE("iou-only baseline fragments a replayed scene") {
    AssociationConfig base = cfg;
    base.iou_only = true;
    ObjectMap map(base.seed);
    for (std::int64_t frame = 0; frame < 3; ++frame) {
      std::vector<LocalObject> locals = {
          make_local("chair", {-1, 0, 0.4}, {0.3, 0.3, 0.4}, 60, 1, frame, K, T_cw),
          make_local("book", {1.2, 0, 0.3}, {0.15, 0.1, 0.03}, 60, 2, frame, K, T_cw)};
      associate_frame(map, locals, K, T_cw, base);
    }
    CHECK(map.objects.size() == 6);  // strict two-box motion gate never engages
  }

  SUBCASE("object count bounds") {
    ObjectMap map(cfg.seed);
    int detections = 0;
    std::mt19937_64 rng(55);
    for (std::int64_t frame = 0; frame < 4; ++frame) {
      std::vector<LocalObject> locals;
      for (int k = 0; k < 3; ++k) {
        if (rng() % 4 == 0) continue;  // dropout
        locals.push_back(make_local("chair", {double(k) * 1.5 - 1.5, 0, 0.4},
                                    {0.3, 0.3, 0.4}, 40, 10 + k, frame, K, T_cw));
        ++detections;
      }
      associate_frame(map, locals, K, T_cw, cfg);
    }
    CHECK(map.objects.size() >= 1);
    CHECK(int(map.objects.size()) <= detections);
  }
}

TEST_CASE("merge_duplicates") {
  AssociationConfig cfg;

  SUBCASE("split observations of one object merge, lower id kept") {
    // second global is the first one displaced 1 mm: identical spread, mean
    // difference far below the pooled t threshold
    ObjectMap map;
    map.objects.push_back(make_global(0, "chair", {1, 1, 1}, 0.02, 10, 5));
    GlobalObject g1 = map.objects[0];
    g1.id = 1;
    for (auto& c : g1.centroid_history) c.x() += 0.001;
    for (auto& p : g1.points) p.x() += 0.001;
    map.objects.push_back(g1);
    map.next_id = 2;
    auto merges = merge_duplicates(map, cfg);
    REQUIRE(merges.size() == 1);
    CHECK(merges[0].kept_id == 0);
    CHECK(merges[0].removed_id == 1);
    REQUIRE(map.objects.size() == 1);
    CHECK(map.objects[0].id == 0);
    CHECK(map.objects[0].centroid_history.size() == 20);
    CHECK(map.objects[0].label_votes.at("chair") == 20);
  }
  SUBCASE("distinct objects two meters apart stay separate") {
    ObjectMap map;
    map.objects.push_back(make_global(0, "chair", {0, 0, 0}, 0.02, 10, 5));
    map.objects.push_back(make_global(1, "chair", {2, 0, 0}, 0.02, 10, 6));
    map.next_id = 2;
    CHECK(merge_duplicates(map, cfg).empty());
    CHECK(map.objects.size() == 2);
  }
  SUBCASE("nearby but statistically distinct objects stay separate") {
    ObjectMap map;
    map.objects.push_back(make_global(0, "chair", {0, 0, 0}, 0.01, 10, 5));
    map.objects.push_back(make_global(1, "chair", {0.5, 0, 0}, 0.01, 10, 6));
    map.next_id = 2;
    CHECK(merge_duplicates(map, cfg).empty());
  }
  SUBCASE("different labels never merge") {
    ObjectMap map;
    map.objects.push_back(make_global(0, "chair", {0, 0, 0}, 0.02, 10, 5));
    map.objects.push_back(make_global(1, "sofa", {0, 0, 0}, 0.02, 10, 6));
    map.next_id = 2;
    CHECK(merge_duplicates(map, cfg).empty());
  }
  SUBCASE("zero-variance histories fall back to the distance gate") {
    ObjectMap map;
    map.objects.push_back(make_global(0, "chair", {0, 0, 0}, 0.0, 5, 5));
    map.objects.push_back(make_global(1, "chair", {0.05, 0, 0}, 0.0, 5, 6));
    map.objects.push_back(make_global(2, "chair", {0.5, 0, 0}, 0.0, 5, 7));
    map.next_id = 3;
    auto merges = merge_duplicates(map, cfg);
    REQUIRE(merges.size() == 1);  // 0+1 merge (5 cm), 2 stays (50 cm > fallback gate)
    CHECK(merges[0].kept_id == 0);
    CHECK(merges[0].removed_id == 1);
    CHECK(map.objects.size() == 2);
  }
  SUBCASE("single object yields no merges") {
    ObjectMap map;
    map.objects.push_back(make_global(0, "chair", {0, 0, 0}, 0.02, 10, 5));
    map.next_id = 1;
    CHECK(merge_duplicates(map, cfg).empty());
  }
}

TEST_CASE("reservoir cap bounds stored points") {
  CameraIntrinsics K;
  Pose T_cw = look_at({0, -4, 0.8}, {0, 0, 0.4});
  AssociationConfig cfg;
  cfg.subsample_cap = 100;
  ObjectMap map(3);
  for (std::int64_t frame = 0; frame < 5; ++frame) {
    auto l = make_local("chair", {0, 0, 0.4}, {0.3, 0.3, 0.4}, 60, 1, frame, K, T_cw);
    associate_frame(map, {l}, K, T_cw, cfg);
  }
  REQUIRE(map.objects.size() == 1);
  CHECK(map.objects[0].points.size() == 100);
  CHECK(map.objects[0].points_seen == 300);
}
