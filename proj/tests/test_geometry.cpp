#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "objslam/geometry.hpp"

using namespace objslam;
namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("pose compose/inverse round-trip") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    Pose T;
    T.R = yaw_rotation(u(rng) * kPi);
    T.t = Eigen::Vector3d(u(rng), u(rng), u(rng));
    Pose I = T.compose(T.inverse());
    CHECK((I.R - Eigen::Matrix3d::Identity()).norm() < 1e-12);
    CHECK(I.t.norm() < 1e-12);
    CHECK(is_rotation(T.R));
  }
}

TEST_CASE("project_point pinhole basics") {
  CameraIntrinsics K{500, 500, 320, 240, 640, 480};
  Pose identity;
  auto center = project_point({0, 0, 2}, K, identity);
  REQUIRE(center.has_value());
  CHECK(center->x() == doctest::Approx(320).epsilon(1e-12));
  CHECK(center->y() == doctest::Approx(240).epsilon(1e-12));

  auto off = project_point({1, 0, 2}, K, identity);
  REQUIRE(off.has_value());
  CHECK(off->x() == doctest::Approx(570).epsilon(1e-12));

  CHECK_FALSE(project_point({0, 0, -1}, K, identity).has_value());
  CHECK_FALSE(project_point({0, 0, 1e-7}, K, identity).has_value());
  CHECK_THROWS_AS(project_point({std::nan(""), 0, 1}, K, identity), std::invalid_argument);
}

TEST_CASE("bbox_iou basics") {
  BBox2D unit{0, 0, 1, 1};
  CHECK(bbox_iou(unit, unit) == doctest::Approx(1.0));
  CHECK(bbox_iou(unit, BBox2D{2, 2, 3, 3}) == 0.0);
  // half-overlap: inter 0.5, union 1.5
  CHECK(bbox_iou(unit, BBox2D{0.5, 0, 1.5, 1}) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(bbox_iou(unit, BBox2D{1, 1, 0, 0}), std::invalid_argument);
  // degenerate zero-area boxes: union 0 -> 0
  CHECK(bbox_iou(BBox2D{1, 1, 1, 1}, BBox2D{1, 1, 1, 1}) == 0.0);
}

TEST_CASE("cube vertices follow the sign-bit order and yaw rotation") {
  CubeModel c{{0, 0, 0}, kPi / 2, {2, 1, 1}};
  auto v = cube_vertices(c);
  // vertex 7 = (+l,+w,+h) in the object frame -> (-1, 2, 1) after a 90-degree yaw
  CHECK(v[7].x() == doctest::Approx(-1).epsilon(1e-12));
  CHECK(v[7].y() == doctest::Approx(2).epsilon(1e-12));
  CHECK(v[7].z() == doctest::Approx(1).epsilon(1e-12));
  // vertex 0 = (-l,-w,-h)
  CHECK(v[0].x() == doctest::Approx(1).epsilon(1e-12));
  CHECK(v[0].y() == doctest::Approx(-2).epsilon(1e-12));

  SUBCASE("round-trip back to the object frame") {
    Eigen::Matrix3d Rinv = yaw_rotation(-c.theta);
    for (int k = 0; k < 8; ++k) {
      Eigen::Vector3d p = Rinv * (v[k] - c.t);
      Eigen::Vector3d expect((k & 1) ? 2.0 : -2.0, (k & 2) ? 1.0 : -1.0, (k & 4) ? 1.0 : -1.0);
      CHECK((p - expect).norm() < 1e-9);
    }
  }
}

TEST_CASE("cube edges: 12 edges, every vertex degree 3, endpoints differ in one bit") {
  const auto& edges = cube_edges();
  CHECK(edges.size() == 12);
  int degree[8] = {0};
  for (const auto& e : edges) {
    int diff = e[0] ^ e[1];
    CHECK((diff == 1 || diff == 2 || diff == 4));
    ++degree[e[0]];
    ++degree[e[1]];
  }
  for (int d : degree) CHECK(d == 3);
}

TEST_CASE("segment_angle folding and exact reversal invariance") {
  LineSegment2D diag{{0, 0}, {1, 1}};
  CHECK(segment_angle(diag) == doctest::Approx(kPi / 4));
  LineSegment2D rev{{1, 1}, {0, 0}};
  CHECK(segment_angle(diag) == segment_angle(rev));  // exact, not approximate

  LineSegment2D nearPi{{0, 0}, {-1, 1e-9}};
  CHECK(segment_angle(nearPi) == doctest::Approx(kPi).epsilon(1e-6));

  LineSegment2D horiz{{0, 0}, {-1, 0}};
  CHECK(segment_angle(horiz) == 0.0);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 200; ++i) {
    LineSegment2D s{{u(rng), u(rng)}, {u(rng), u(rng)}};
    if ((s.b - s.a).norm() == 0) continue;
    LineSegment2D r{s.b, s.a};
    double a = segment_angle(s);
    CHECK(a == segment_angle(r));
    CHECK(a >= 0);
    CHECK(a < kPi);
  }
  CHECK_THROWS_AS(segment_angle(LineSegment2D{{1, 1}, {1, 1}}), std::invalid_argument);
}

TEST_CASE("project_bbox clamps to the image and reports invisibility") {
  CameraIntrinsics K{500, 500, 320, 240, 640, 480};
  Pose identity;
  std::vector<Eigen::Vector3d> pts = {{0, 0, 2}, {5, 5, 2}};  // second lands far off-image
  auto box = project_bbox(pts, K, identity);
  REQUIRE(box.has_value());
  CHECK(box->xmin == doctest::Approx(320));
  CHECK(box->xmax == doctest::Approx(640));  // clamped from 1570
  CHECK(box->ymax == doctest::Approx(480));

  std::vector<Eigen::Vector3d> behind = {{0, 0, -1}, {1, 1, -2}};
  CHECK_FALSE(project_bbox(behind, K, identity).has_value());
}

TEST_CASE("normalize_yaw lands in [-pi/2, pi/2)") {
  CHECK(normalize_yaw(0.4) == doctest::Approx(0.4));
  CHECK(normalize_yaw(kPi / 2) == doctest::Approx(-kPi / 2));
  CHECK(normalize_yaw(2.0) == doctest::Approx(2.0 - kPi));
  CHECK(normalize_yaw(-2.0) == doctest::Approx(kPi - 2.0));
  for (double th = -7; th < 7; th += 0.13) {
    double n = normalize_yaw(th);
    CHECK(n >= -kPi / 2);
    CHECK(n < kPi / 2);
    CHECK(std::fabs(std::remainder(n - th, kPi)) < 1e-12);
  }
}

TEST_CASE("footprint and 3D box IoU") {
  CubeModel a{{0, 0, 0}, 0, {0.5, 0.5, 0.5}};
  CubeModel b = a;
  CHECK(footprint_iou(a, b) == doctest::Approx(1.0));
  CHECK(box_iou_3d(a, b) == doctest::Approx(1.0));

  b.t.x() = 0.5;  // half-extent offset: inter 0.5, union 1.5
  CHECK(box_iou_3d(a, b) == doctest::Approx(1.0 / 3.0));
  CHECK(footprint_iou(a, b) == doctest::Approx(1.0 / 3.0));

  b.t.x() = 5;
  CHECK(box_iou_3d(a, b) == 0.0);

  // 45-degree rotated square on itself: the overlap octagon has area 2*sqrt(2)-2
  CubeModel c{{0, 0, 0}, kPi / 4, {0.5, 0.5, 0.5}};
  double inter = 2 * std::sqrt(2.0) - 2;
  double expect = inter / (2 - inter);  // == sqrt(2)/2
  CHECK(footprint_iou(a, c) == doctest::Approx(expect).epsilon(1e-9));

  // vertical offset only
  CubeModel d = a;
  d.t.z() = 0.5;
  CHECK(box_iou_3d(a, d) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("convex polygon helpers") {
  std::vector<Eigen::Vector2d> sq = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  CHECK(polygon_area(sq) == doctest::Approx(1.0));
  std::vector<Eigen::Vector2d> shifted = {{0.5, 0}, {1.5, 0}, {1.5, 1}, {0.5, 1}};
  auto inter = convex_clip(sq, shifted);
  CHECK(polygon_area(inter) == doctest::Approx(0.5));
  std::vector<Eigen::Vector2d> far = {{5, 5}, {6, 5}, {6, 6}, {5, 6}};
  CHECK(polygon_area(convex_clip(sq, far)) == doctest::Approx(0.0));
}
