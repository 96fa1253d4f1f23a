#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace pdmp::stats {

/// P(K > lambda) for the Kolmogorov distribution, series truncated at 100 terms.
double kolmogorov_survival(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// One-sample two-sided KS test with asymptotic p-value (sqrt(n) * D).
KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);

/// Two-sample two-sided KS test, effective size nm / (n + m).
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// One-sided two-sample statistic sup_z (F_upper(z) - F_lower(z)) and its asymptotic
/// p-value exp(-2 D^2 nm/(n+m)). Small p rejects "lower <=_st upper".
KsResult ks_one_sided_dominance(std::vector<double> lower, std::vector<double> upper);

struct ChiSquareResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  std::vector<double> observed;
  std::vector<double> expected;
};

/// Merges adjacent bins (from both tails inward) until every expected count >= min_expected.
void pool_bins(std::vector<double>& observed, std::vector<double>& expected, double min_expected = 5.0);

/// Pearson chi-square with df = bins - 1 - fitted_params. p = 1 when df <= 0.
ChiSquareResult chi_square(std::vector<double> observed, std::vector<double> expected, int fitted_params,
                           bool pool = true);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};
MeanSe mean_se(std::span<const double> values);

/// Ratio estimator sum(y) / sum(l) over i.i.d. batches with its delta-method standard error.
struct RatioEstimate {
  double estimate = 0.0;
  double se = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;
  std::size_t batches = 0;
};
RatioEstimate ratio_estimate(std::span<const double> y, std::span<const double> l);

/// Poisson pmf and cdf, computed in log space.
double poisson_pmf(unsigned k, double mean);
double poisson_cdf(unsigned k, double mean);

}  // namespace pdmp::stats
