#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

namespace objslam {

enum class TestResult { Accept, Reject, NotApplicable, DegenerateVariance };

const char* to_string(TestResult r);

// Two-sided quantiles: P(|Z| <= s) = 1 - alpha for the standard normal,
// P(|T_df| <= s) = 1 - alpha for Student's t.
double normal_quantile_two_sided(double alpha);
double t_quantile_two_sided(double alpha, double df);

struct RankSumStat {
  double w;     // min(W_P, W_Q)
  double mean;  // |P||Q|/2
  double var;   // |P||Q|(|P|+|Q|+1)/12, tie correction dropped
};

// Mann-Whitney rank statistic with mid-ranks for ties.
RankSumStat rank_sum_stat(std::span<const double> p, std::span<const double> q);

// Accept iff W lies in [mean - s*sqrt(var), mean + s*sqrt(var)], s the two-sided
// normal quantile. Below min_samples per side the normal approximation is not
// trusted and the test is NotApplicable.
TestResult rank_sum_test(std::span<const double> p, std::span<const double> q, double alpha,
                         std::size_t min_samples = 5);

// Conjunction of rank_sum_test over the three coordinate dimensions.
TestResult np_test_3d(std::span<const Eigen::Vector3d> p, std::span<const Eigen::Vector3d> q,
                      double alpha, std::size_t min_samples = 5);

// One-sample t-test of history C against value v: t = (mean - v)/(sd/sqrt(n)), df = n-1.
TestResult single_t_test_1d(std::span<const double> c, double v, double alpha);

// All three dimensions must accept. Any per-dimension sd <= 1e-9 reports
// DegenerateVariance so the caller can fall back to a distance gate.
TestResult single_t_test(std::span<const Eigen::Vector3d> history, const Eigen::Vector3d& c,
                         double alpha);

// Two-sample pooled-variance t-test, df = n1+n2-2.
TestResult double_t_test_1d(std::span<const double> a, std::span<const double> b, double alpha);

TestResult double_t_test(std::span<const Eigen::Vector3d> a, std::span<const Eigen::Vector3d> b,
                         double alpha);

double sample_mean(std::span<const double> x);
double sample_sd(std::span<const double> x);  // Bessel-corrected

}  // namespace objslam
