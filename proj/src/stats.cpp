#include "objslam/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace objslam {

namespace {

constexpr double kSdFloor = 1e-9;

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
}

std::vector<double> dim_values(std::span<const Eigen::Vector3d> pts, int d) {
  std::vector<double> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) out[i] = pts[i][d];
  return out;
}

}  // namespace

const char* to_string(TestResult r) {
  switch (r) {
    case TestResult::Accept: return "accept";
    case TestResult::Reject: return "reject";
    case TestResult::NotApplicable: return "not_applicable";
    case TestResult::DegenerateVariance: return "degenerate_variance";
  }
  return "?";
}

double normal_quantile_two_sided(double alpha) {
  check_alpha(alpha);
  boost::math::normal_distribution<double> n(0.0, 1.0);
  return boost::math::quantile(n, 1.0 - alpha / 2.0);
}

double t_quantile_two_sided(double alpha, double df) {
  check_alpha(alpha);
  if (!(df >= 1.0)) throw std::invalid_argument("t quantile needs df >= 1");
  boost::math::students_t_distribution<double> t(df);
  return boost::math::quantile(t, 1.0 - alpha / 2.0);
}

double sample_mean(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / double(x.size());
}

double sample_sd(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  double m = sample_mean(x);
  double s2 = 0;
  for (double v : x) s2 += (v - m) * (v - m);
  return std::sqrt(s2 / double(x.size() - 1));
}

RankSumStat rank_sum_stat(std::span<const double> p, std::span<const double> q) {
  const std::size_t np = p.size(), nq = q.size();
  if (np == 0 || nq == 0) throw std::invalid_argument("rank_sum_stat: empty sample");
  // (value, from_p) pairs sorted by value; ties get the mean of their positions.
  std::vector<std::pair<double, bool>> all;
  all.reserve(np + nq);
  for (double v : p) all.emplace_back(v, true);
  for (double v : q) all.emplace_back(v, false);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum_p = 0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    double mid_rank = 0.5 * double(i + 1 + j);  // mean of 1-based positions i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second) rank_sum_p += mid_rank;
    i = j;
  }
  double wp = rank_sum_p - double(np) * double(np + 1) / 2.0;
  double wq = double(np) * double(nq) - wp;
  RankSumStat st;
  st.w = std::min(wp, wq);
  st.mean = double(np) * double(nq) / 2.0;
  st.var = double(np) * double(nq) * double(np + nq + 1) / 12.0;
  return st;
}

TestResult rank_sum_test(std::span<const double> p, std::span<const double> q, double alpha,
                         std::size_t min_samples) {
  check_alpha(alpha);
  if (p.size() < min_samples || q.size() < min_samples) return TestResult::NotApplicable;
  if (p.empty() || q.empty()) return TestResult::NotApplicable;
  RankSumStat st = rank_sum_stat(p, q);
  double s = normal_quantile_two_sided(alpha);
  double half = s * std::sqrt(st.var);
  bool inside = st.w >= st.mean - half && st.w <= st.mean + half;
  return inside ? TestResult::Accept : TestResult::Reject;
}

TestResult np_test_3d(std::span<const Eigen::Vector3d> p, std::span<const Eigen::Vector3d> q,
                      double alpha, std::size_t min_samples) {
  check_alpha(alpha);
  if (p.size() < min_samples || q.size() < min_samples) return TestResult::NotApplicable;
  for (int d = 0; d < 3; ++d) {
    auto pv = dim_values(p, d);
    auto qv = dim_values(q, d);
    if (rank_sum_test(pv, qv, alpha, min_samples) != TestResult::Accept)
      return TestResult::Reject;
  }
  return TestResult::Accept;
}

TestResult single_t_test_1d(std::span<const double> c, double v, double alpha) {
  check_alpha(alpha);
  if (c.size() < 3) return TestResult::NotApplicable;
  double sd = sample_sd(c);
  if (sd <= kSdFloor) return TestResult::DegenerateVariance;
  double n = double(c.size());
  double t = (sample_mean(c) - v) / (sd / std::sqrt(n));
  return std::fabs(t) <= t_quantile_two_sided(alpha, n - 1) ? TestResult::Accept
                                                            : TestResult::Reject;
}

TestResult single_t_test(std::span<const Eigen::Vector3d> history, const Eigen::Vector3d& c,
                         double alpha) {
  check_alpha(alpha);
  if (history.size() < 3) return TestResult::NotApplicable;
  std::vector<double> dims[3] = {dim_values(history, 0), dim_values(history, 1),
                                 dim_values(history, 2)};
  for (int d = 0; d < 3; ++d)
    if (sample_sd(dims[d]) <= kSdFloor) return TestResult::DegenerateVariance;
  for (int d = 0; d < 3; ++d)
    if (single_t_test_1d(dims[d], c[d], alpha) != TestResult::Accept) return TestResult::Reject;
  return TestResult::Accept;
}

TestResult double_t_test_1d(std::span<const double> a, std::span<const double> b, double alpha) {
  check_alpha(alpha);
  if (a.size() < 2 || b.size() < 2) return TestResult::NotApplicable;
  double n1 = double(a.size()), n2 = double(b.size());
  double v1 = sample_sd(a), v2 = sample_sd(b);
  double pooled = ((n1 - 1) * v1 * v1 + (n2 - 1) * v2 * v2) / (n1 + n2 - 2);
  double sd = std::sqrt(pooled * (1.0 / n1 + 1.0 / n2));
  if (sd <= kSdFloor) return TestResult::DegenerateVariance;
  double t = (sample_mean(a) - sample_mean(b)) / sd;
  return std::fabs(t) <= t_quantile_two_sided(alpha, n1 + n2 - 2) ? TestResult::Accept
                                                                  : TestResult::Reject;
}

TestResult double_t_test(std::span<const Eigen::Vector3d> a, std::span<const Eigen::Vector3d> b,
                         double alpha) {
  check_alpha(alpha);
  if (a.size() < 2 || b.size() < 2) return TestResult::NotApplicable;
  bool degenerate = false;
  for (int d = 0; d < 3; ++d) {
    auto av = dim_values(a, d);
    auto bv = dim_values(b, d);
    TestResult r = double_t_test_1d(av, bv, alpha);
    if (r == TestResult::DegenerateVariance) {
      degenerate = true;
      continue;
    }
    if (r != TestResult::Accept) return TestResult::Reject;
  }
  return degenerate ? TestResult::DegenerateVariance : TestResult::Accept;
}

}  // namespace objslam
