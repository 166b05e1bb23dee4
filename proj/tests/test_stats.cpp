#include <doctest.h>

#include <random>
#include <vector>

#include "objslam/stats.hpp"

using namespace objslam;

TEST_CASE("quantiles match standard tables") {
  // frozen from standard normal / t tables
  CHECK(normal_quantile_two_sided(0.05) == doctest::Approx(1.9599640).epsilon(1e-6));
  CHECK(normal_quantile_two_sided(0.01) == doctest::Approx(2.5758293).epsilon(1e-6));
  CHECK(t_quantile_two_sided(0.05, 9) == doctest::Approx(2.2621572).epsilon(1e-6));
  CHECK(t_quantile_two_sided(0.05, 2) == doctest::Approx(4.3026527).epsilon(1e-6));
  CHECK_THROWS_AS(normal_quantile_two_sided(0.0), std::invalid_argument);
  CHECK_THROWS_AS(normal_quantile_two_sided(1.0), std::invalid_argument);
}

TEST_CASE("rank_sum_stat hand-computed cases") {
  SUBCASE("disjoint samples: P={1,2,3}, Q={10,20,30}") {
    std::vector<double> p{1, 2, 3}, q{10, 20, 30};
    RankSumStat st = rank_sum_stat(p, q);
    CHECK(st.w == doctest::Approx(0.0));  // W_P = 6 - 6 = 0, W_Q = 9
    CHECK(st.mean == doctest::Approx(4.5));
    CHECK(st.var == doctest::Approx(5.25));
    // region at alpha=0.05: 4.5 +- 1.96*sqrt(5.25) ~ [0.0086, 8.99] -> W=0 rejects
    CHECK(rank_sum_test(p, q, 0.05, 0) == TestResult::Reject);
  }
  SUBCASE("interleaved samples: P={1,3,5}, Q={2,4,6}") {
    std::vector<double> p{1, 3, 5}, q{2, 4, 6};
    RankSumStat st = rank_sum_stat(p, q);
    CHECK(st.w == doctest::Approx(3.0));  // ranks of P: 1,3,5 -> W_P = 9-6 = 3
    CHECK(rank_sum_test(p, q, 0.05, 0) == TestResult::Accept);
  }
  SUBCASE("|P|=|Q|=4 gives m(W)=8") {
    std::vector<double> p{1, 2, 3, 4}, q{5, 6, 7, 8};
    CHECK(rank_sum_stat(p, q).mean == doctest::Approx(8.0));
  }
  SUBCASE("mid-ranks for ties (hand-derived)") {
    // sorted: 1,2,2,2,3,4,5,6 with the three 2s at positions 2..4 -> mid-rank 3
    // P ranks: 1,3,3,5 -> sum 12 -> W_P = 12 - 10 = 2; W_Q = 16 - 2 = 14; W = 2
    std::vector<double> p{1, 2, 2, 3}, q{2, 4, 5, 6};
    RankSumStat st = rank_sum_stat(p, q);
    CHECK(st.w == doctest::Approx(2.0));
    CHECK(st.mean == doctest::Approx(8.0));
    CHECK(st.var == doctest::Approx(12.0));
  }
}

TEST_CASE("rank_sum_test minimum sample size") {
  std::vector<double> four{1, 2, 3, 4}, five{1, 2, 3, 4, 5};
  CHECK(rank_sum_test(four, five, 0.05) == TestResult::NotApplicable);
  CHECK(rank_sum_test(five, five, 0.05) == TestResult::Accept);
}

TEST_CASE("rank_sum_test calibration (quick Monte Carlo)") {
  // full 10k-trial version lives in the acceptance suite
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g(0.0, 1.0);
  int accepted = 0;
  const int trials = 2000, n = 50;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> p(n), q(n);
    for (auto& v : p) v = g(rng);
    for (auto& v : q) v = g(rng);
    if (rank_sum_test(p, q, 0.05) == TestResult::Accept) ++accepted;
  }
  double rate = double(accepted) / trials;
  CHECK(rate > 0.90);
  CHECK(rate < 0.99);
}

TEST_CASE("np_test_3d") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Eigen::Vector3d> p(100);
  for (auto& v : p) v = {g(rng), 2 * g(rng), 0.5 * g(rng) + 1};

  SUBCASE("deep copy with tiny jitter accepts") {
    std::vector<Eigen::Vector3d> q = p;
    for (auto& v : q) v += Eigen::Vector3d::Constant(1e-9);
    CHECK(np_test_3d(p, q, 0.05) == TestResult::Accept);
  }
  SUBCASE("shift by 10x extent in x rejects") {
    double extent = 0;
    for (const auto& v : p) extent = std::max(extent, std::fabs(v.x()));
    std::vector<Eigen::Vector3d> q = p;
    for (auto& v : q) v.x() += 10 * extent;
    CHECK(np_test_3d(p, q, 0.05) == TestResult::Reject);
  }
  SUBCASE("axis permutation with distinct per-axis distributions rejects") {
    std::vector<Eigen::Vector3d> q(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) q[i] = {p[i].y(), p[i].z(), p[i].x()};
    CHECK(np_test_3d(p, q, 0.05) == TestResult::Reject);
  }
  SUBCASE("small samples are NotApplicable") {
    std::vector<Eigen::Vector3d> small(p.begin(), p.begin() + 4);
    CHECK(np_test_3d(small, p, 0.05) == TestResult::NotApplicable);
  }
}

TEST_CASE("single_t_test") {
  SUBCASE("candidate equal to the history mean accepts with t=0") {
    std::vector<Eigen::Vector3d> c;
    for (double d : {0.8, 0.9, 1.0, 1.1, 1.2})
      c.push_back(Eigen::Vector3d::Constant(d));
    CHECK(single_t_test(c, Eigen::Vector3d::Constant(1.0), 0.05) == TestResult::Accept);
  }
  SUBCASE("t = -31.6 far beyond t_{0.025,9} = 2.262 rejects") {
    // 10 samples, mean 0, per-dim sd 0.1 -> t_x = (0-1)/(0.1/sqrt(10)) = -31.62
    std::vector<double> vals{-0.15, -0.1, -0.05, -0.05, 0.0, 0.0, 0.05, 0.05, 0.1, 0.15};
    double m = sample_mean(vals), sd = sample_sd(vals);
    std::vector<Eigen::Vector3d> c;
    for (double v : vals) {
      double z = (v - m) / sd * 0.1;  // exact mean 0, sd 0.1
      c.push_back({z, z + 0.0, z});
    }
    double t = (0.0 - 1.0) / (0.1 / std::sqrt(10.0));
    CHECK(t == doctest::Approx(-31.6227766));
    CHECK(single_t_test(c, {1, 0, 0}, 0.05) == TestResult::Reject);
    CHECK(single_t_test(c, {0, 0, 0}, 0.05) == TestResult::Accept);
  }
  SUBCASE("zero variance reports DegenerateVariance") {
    std::vector<Eigen::Vector3d> c(5, Eigen::Vector3d(1, 2, 3));
    CHECK(single_t_test(c, {1, 2, 3}, 0.05) == TestResult::DegenerateVariance);
  }
  SUBCASE("short history is NotApplicable") {
    std::vector<Eigen::Vector3d> c(2, Eigen::Vector3d(1, 2, 3));
    CHECK(single_t_test(c, {1, 2, 3}, 0.05) == TestResult::NotApplicable);
  }
}

TEST_CASE("double_t_test") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 0.01);
  SUBCASE("copy of the same history accepts") {
    std::vector<Eigen::Vector3d> c1;
    for (int i = 0; i < 6; ++i) c1.push_back(Eigen::Vector3d(g(rng), g(rng), g(rng)));
    std::vector<Eigen::Vector3d> c2 = c1;
    CHECK(double_t_test(c1, c2, 0.05) == TestResult::Accept);
  }
  SUBCASE("clusters 1 m apart with 1 cm spread reject") {
    std::vector<Eigen::Vector3d> c1, c2;
    for (int i = 0; i < 6; ++i) {
      c1.push_back(Eigen::Vector3d(g(rng), g(rng), g(rng)));
      c2.push_back(Eigen::Vector3d(1 + g(rng), g(rng), g(rng)));
    }
    CHECK(double_t_test(c1, c2, 0.05) == TestResult::Reject);
  }
  SUBCASE("equal-variance n=2 case reduces to (m1-m2)/sigma") {
    // sd of {a-d, a+d} is d*sqrt(2); pooled sigma_d = sqrt(((v+v)/2)*(1/2+1/2)) = sd
    std::vector<double> a{-0.01, 0.01}, b{0.04, 0.06};
    double sd = sample_sd(a);
    double t_manual = (sample_mean(a) - sample_mean(b)) / sd;
    CHECK(t_manual == doctest::Approx(-0.05 / sd));
    // |t| = 0.05/0.01414 = 3.54 > t_{0.025,2} = 4.30? no: 3.54 < 4.30 -> accept
    CHECK(double_t_test_1d(a, b, 0.05) == TestResult::Accept);
    std::vector<double> b2{0.09, 0.11};
    CHECK(double_t_test_1d(a, b2, 0.05) == TestResult::Reject);
  }
  SUBCASE("degenerate pooled variance flags") {
    std::vector<double> a{1, 1}, b{1, 1};
    CHECK(double_t_test_1d(a, b, 0.05) == TestResult::DegenerateVariance);
  }
}
