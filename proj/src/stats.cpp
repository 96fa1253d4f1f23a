#include "pdmp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/chi_squared.hpp>

#include "pdmp/errors.hpp"

namespace pdmp::stats {

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  constexpr int kTerms = 100;
  double p = 0.0;
  if (lambda < 0.3) {
    // Jacobi-transformed series, accurate for small lambda.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf = 0.0;
    for (int k = 1; k <= kTerms; ++k) {
      const double odd = 2.0 * k - 1.0;
      cdf += std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    p = 1.0 - cdf;
  } else {
    for (int k = 1; k <= kTerms; ++k) {
      const double term = std::exp(-2.0 * k * k * lambda * lambda);
      p += (k % 2 == 1 ? 2.0 : -2.0) * term;
    }
  }
  return std::clamp(p, 0.0, 1.0);
}

KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw InsufficientData("KS test needs at least one sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, kolmogorov_survival(std::sqrt(n) * d), samples.size()};
}

namespace {

// sup_z (F_a(z) - F_b(z)) and sup_z (F_b(z) - F_a(z)) over the pooled sample.
std::pair<double, double> two_sample_extremes(std::vector<double>& a, std::vector<double>& b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double a_over_b = 0.0, b_over_a = 0.0;
  while (i < a.size() || j < b.size()) {
    double z;
    if (j == b.size() || (i < a.size() && a[i] <= b[j])) z = a[i];
    else z = b[j];
    while (i < a.size() && a[i] <= z) ++i;
    while (j < b.size() && b[j] <= z) ++j;
    const double fa = static_cast<double>(i) / na;
    const double fb = static_cast<double>(j) / nb;
    a_over_b = std::max(a_over_b, fa - fb);
    b_over_a = std::max(b_over_a, fb - fa);
  }
  return {a_over_b, b_over_a};
}

}  // namespace

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InsufficientData("two-sample KS test needs two non-empty samples");
  const auto [ab, ba] = two_sample_extremes(a, b);
  const double d = std::max(ab, ba);
  const double ne = static_cast<double>(a.size()) * static_cast<double>(b.size()) /
                    static_cast<double>(a.size() + b.size());
  return {d, kolmogorov_survival(std::sqrt(ne) * d), a.size() + b.size()};
}

KsResult ks_one_sided_dominance(std::vector<double> lower, std::vector<double> upper) {
  if (lower.empty() || upper.empty()) throw InsufficientData("dominance check needs two non-empty samples");
  // lower <=_st upper means F_lower >= F_upper; evidence against it is F_upper - F_lower > 0.
  const auto [lower_over_upper, upper_over_lower] = two_sample_extremes(lower, upper);
  (void)lower_over_upper;
  const double ne = static_cast<double>(lower.size()) * static_cast<double>(upper.size()) /
                    static_cast<double>(lower.size() + upper.size());
  const double d = upper_over_lower;
  return {d, std::min(1.0, std::exp(-2.0 * d * d * ne)), lower.size() + upper.size()};
}

void pool_bins(std::vector<double>& observed, std::vector<double>& expected, double min_expected) {
  // Fold the right tail inward, then the left tail.
  while (expected.size() > 1 && expected.back() < min_expected) {
    expected[expected.size() - 2] += expected.back();
    observed[observed.size() - 2] += observed.back();
    expected.pop_back();
    observed.pop_back();
  }
  while (expected.size() > 1 && expected.front() < min_expected) {
    expected[1] += expected[0];
    observed[1] += observed[0];
    expected.erase(expected.begin());
    observed.erase(observed.begin());
  }
  // Interior bins below the floor merge with their right neighbour.
  for (std::size_t i = 0; i + 1 < expected.size();) {
    if (expected[i] < min_expected) {
      expected[i + 1] += expected[i];
      observed[i + 1] += observed[i];
      expected.erase(expected.begin() + static_cast<std::ptrdiff_t>(i));
      observed.erase(observed.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
    }
  }
}

ChiSquareResult chi_square(std::vector<double> observed, std::vector<double> expected, int fitted_params,
                           bool pool) {
  if (observed.size() != expected.size()) throw std::invalid_argument("chi_square: size mismatch");
  if (pool) pool_bins(observed, expected);
  ChiSquareResult r;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (expected[i] <= 0.0) continue;
    const double d = observed[i] - expected[i];
    r.statistic += d * d / expected[i];
  }
  r.df = static_cast<int>(observed.size()) - 1 - fitted_params;
  if (r.df <= 0) {
    r.p_value = 1.0;
  } else {
    boost::math::chi_squared dist(r.df);
    r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  }
  r.observed = std::move(observed);
  r.expected = std::move(expected);
  return r;
}

MeanSe mean_se(std::span<const double> values) {
  MeanSe r;
  r.n = values.size();
  if (values.empty()) return r;
  double sum = 0.0;
  for (double v : values) sum += v;
  r.mean = sum / static_cast<double>(r.n);
  if (r.n < 2) {
    r.se = std::numeric_limits<double>::infinity();
    return r;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.se = std::sqrt(ss / static_cast<double>(r.n - 1) / static_cast<double>(r.n));
  return r;
}

RatioEstimate ratio_estimate(std::span<const double> y, std::span<const double> l) {
  if (y.size() != l.size()) throw std::invalid_argument("ratio_estimate: size mismatch");
  RatioEstimate r;
  r.batches = y.size();
  for (std::size_t i = 0; i < y.size(); ++i) {
    r.numerator += y[i];
    r.denominator += l[i];
  }
  if (r.denominator <= 0.0) {
    r.estimate = std::numeric_limits<double>::quiet_NaN();
    r.se = std::numeric_limits<double>::infinity();
    return r;
  }
  r.estimate = r.numerator / r.denominator;
  if (r.batches < 2) {
    r.se = std::numeric_limits<double>::infinity();
    return r;
  }
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - r.estimate * l[i];
    ss += d * d;
  }
  const double b = static_cast<double>(r.batches);
  r.se = std::sqrt(ss * b / (b - 1.0)) / r.denominator;
  return r;
}

double poisson_pmf(unsigned k, double mean) {
  if (mean == 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(k * std::log(mean) - mean - std::lgamma(k + 1.0));
}

double poisson_cdf(unsigned k, double mean) {
  double s = 0.0;
  for (unsigned i = 0; i <= k; ++i) s += poisson_pmf(i, mean);
  return std::min(1.0, s);
}

}  // namespace pdmp::stats
