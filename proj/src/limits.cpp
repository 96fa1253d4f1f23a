#include "pdmp/limits.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pdmp/errors.hpp"

namespace pdmp {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

void check_rho(double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("rho must lie in [0, 1), got " + fmt(rho));
}

double exp_cdf(double x) { return x <= 0.0 ? 0.0 : -std::expm1(-x); }

}  // namespace

// ---------------------------------------------------------------------------
// rho and w

double solve_w(const JumpLaw& xi, double m, std::vector<double>* scanned) {
  if (!(m > 0.0)) throw ConfigError("solve_w needs mu(inf)/lambda(inf) > 0");
  const double sup = xi.mgf_domain_sup();
  const double w_max = std::isfinite(sup) ? sup - 1e-9 : 1e12;
  auto phi = [&](double w) {
    const auto M = xi.mgf(w);
    if (!M) return std::numeric_limits<double>::infinity();
    return *M - 1.0 + w * m;
  };
  double lo = 1e-6;
  if (lo >= w_max) throw ModelValidationError("MGF domain of the limit jump law is empty near 0");
  if (scanned) scanned->push_back(lo);
  if (!(phi(lo) < 0.0))
    throw ModelValidationError("stability margin is non-negative: phi(" + fmt(lo) + ") = " + fmt(phi(lo)) +
                               " >= 0, no positive root");
  double hi = lo;
  for (;;) {
    hi = std::min(2.0 * hi, w_max);
    if (scanned) scanned->push_back(hi);
    if (phi(hi) > 0.0) break;
    if (hi >= w_max)
      throw ModelValidationError("no sign change of phi on [" + fmt(1e-6) + ", " + fmt(w_max) + "]");
    lo = hi;
  }
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (phi(mid) < 0.0 ? lo : hi) = mid;
  }
  const double pl = std::abs(phi(lo));
  const double ph = std::abs(phi(hi));
  return pl <= ph ? lo : hi;
}

CompoundPoissonParams compute_rho(const ModelSpec& spec) {
  return compute_rho(spec, classify_scenario(spec, make_envelope(spec, spec.default_u0)));
}

CompoundPoissonParams compute_rho(const ModelSpec& spec, const ScenarioReport& report) {
  if (!report.scenario)
    throw ModelValidationError("no scenario applies (stability margin " + fmt(report.margin) + " is non-negative)");
  CompoundPoissonParams p;
  p.scenario = *report.scenario;
  p.margin = report.margin;
  if (p.scenario != Scenario::S3) return p;
  const double mu = spec.drift.at_plus_infinity.value_or_throw("mu(+inf)");
  const double lam = spec.rate.at_plus_infinity.value_or_throw("lambda(+inf)");
  const auto xi = spec.kernel->limit_law();
  if (!xi) throw MissingMetadata("the limit jump law xi(inf) is not declared");
  if (!(lam > 0.0)) throw ModelValidationError("lambda(+inf) must be positive in scenario S3");
  if (mu < 0.0) {
    p.rho = -(lam / mu) * xi->mean();
  } else {
    const double m = mu / lam;
    const double w = solve_w(*xi, m, &p.bracket);
    p.w = w;
    p.w_residual = std::abs(*xi->mgf(w) - 1.0 + w * m);
    p.rho = 1.0 - w * m;
  }
  if (!(p.rho >= 0.0 && p.rho < 1.0))
    throw ModelValidationError("computed rho = " + fmt(p.rho) + " lies outside [0, 1)");
  return p;
}

// ---------------------------------------------------------------------------
// Pi_rho

std::uint64_t GeomCPPath::total() const {
  std::uint64_t t = 0;
  for (auto k : multiplicity) t += k;
  return t;
}

std::uint64_t GeomCPPath::count(double a, double b) const {
  std::uint64_t t = 0;
  const auto first = std::upper_bound(times.begin(), times.end(), a);
  for (auto it = first; it != times.end() && *it <= b; ++it)
    t += multiplicity[static_cast<std::size_t>(it - times.begin())];
  return t;
}

std::uint32_t sample_multiplicity(double rho, Rng& rng) {
  if (rho == 0.0) return 1;
  const double k = std::floor(std::log(rng.uniform_open()) / std::log(rho));
  return 1 + static_cast<std::uint32_t>(std::min(k, 4e9));
}

GeomCPPath simulate_geom_cpp(double rho, double horizon, Rng& rng) {
  check_rho(rho);
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
  GeomCPPath path;
  path.rho = rho;
  path.horizon = horizon;
  const double rate = 1.0 - rho;
  double t = rng.exponential() / rate;
  while (t <= horizon) {
    path.times.push_back(t);
    path.multiplicity.push_back(sample_multiplicity(rho, rng));
    t += rng.exponential() / rate;
  }
  return path;
}

std::uint64_t sample_window_count(double rho, double len, Rng& rng, std::vector<std::uint32_t>* atoms) {
  const double rate = 1.0 - rho;
  std::uint64_t total = 0;
  double t = rng.exponential() / rate;
  while (t <= len) {
    const auto k = sample_multiplicity(rho, rng);
    total += k;
    if (atoms) atoms->push_back(k);
    t += rng.exponential() / rate;
  }
  return total;
}

double laplace_count(double rho, double len, double z) {
  check_rho(rho);
  if (z < 0.0 || len < 0.0) throw ConfigError("laplace_count needs z >= 0 and |B| >= 0");
  return std::exp(-len * (1.0 - rho) * (1.0 - (1.0 - rho) / (std::exp(z) - rho)));
}

std::vector<double> window_count_pmf(double rho, double len, std::size_t kmax) {
  check_rho(rho);
  const double m = (1.0 - rho) * len;
  std::vector<double> pmf(kmax + 1, 0.0);
  if (rho == 0.0) {
    for (std::size_t k = 0; k <= kmax; ++k) pmf[k] = stats::poisson_pmf(static_cast<unsigned>(k), m);
    return pmf;
  }
  pmf[0] = std::exp(-m);
  if (m == 0.0) return pmf;
  const double lm = std::log(m), l1 = std::log1p(-rho), lr = std::log(rho);
  for (std::size_t k = 1; k <= kmax; ++k) {
    double s = 0.0;
    for (std::size_t j = 1; j <= k; ++j) {
      const double dj = static_cast<double>(j), dk = static_cast<double>(k);
      const double lbin = std::lgamma(dk) - std::lgamma(dj) - std::lgamma(dk - dj + 1.0);
      s += std::exp(-m + dj * lm - std::lgamma(dj + 1.0) + lbin + dj * l1 + (dk - dj) * lr);
    }
    pmf[k] = s;
  }
  return pmf;
}

LawValue gamma_law_cdf(double rho, unsigned n, double s, std::uint64_t mc_samples, RngConfig rng) {
  check_rho(rho);
  if (n == 0) throw ConfigError("gamma_law_cdf needs n >= 1");
  if (s < 0.0) throw ConfigError("gamma_law_cdf needs s >= 0");
  const double e = std::exp(-s);
  switch (n) {
    case 1: return {e, 0.0};
    case 2: return {e * (1.0 + (1.0 - rho) * s), 0.0};
    case 3: return {e * (1.0 + (1.0 - rho * rho) * s + (1.0 - rho) * (1.0 - rho) * s * s / 2.0), 0.0};
    default: break;
  }
  if (rho == 0.0) return {stats::poisson_cdf(n - 1, s), 0.0};
  if (mc_samples == 0) throw ConfigError("gamma_law_cdf needs Monte Carlo samples for n >= 4");
  Rng r(rng, SubStream::auxiliary);
  const double len = s / (1.0 - rho);
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < mc_samples; ++i)
    if (sample_window_count(rho, len, r) <= n - 1) ++hits;
  const double p = static_cast<double>(hits) / static_cast<double>(mc_samples);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(mc_samples))};
}

// ---------------------------------------------------------------------------
// Scaled upcrossings and tests

ScaledUpcrossings scale_upcrossings(const std::vector<double>& up_times, double horizon,
                                    const IntensityEstimate& nu_plus) {
  if (!(nu_plus.estimate > 0.0)) throw InsufficientData("estimated upcrossing intensity is zero");
  ScaledUpcrossings s;
  s.level = nu_plus.level;
  s.intensity = nu_plus;
  s.horizon = horizon * nu_plus.estimate;
  s.times.reserve(up_times.size());
  for (double t : up_times) s.times.push_back(t * nu_plus.estimate);
  return s;
}

ScaledUpcrossings scale_upcrossings(const Trajectory& traj, double b, const IntensityEstimate& nu_plus) {
  std::vector<double> up;
  for (const auto& e : detect_crossings(traj, b))
    if (is_up(e.kind)) up.push_back(e.time);
  auto s = scale_upcrossings(up, traj.horizon, nu_plus);
  s.level = b;
  return s;
}

stats::KsResult test_exponential_first_passage(const std::vector<double>& passage_times, double rho, double nu) {
  if (passage_times.size() < 200)
    throw InsufficientData("need at least 200 first-passage replications, got " +
                           std::to_string(passage_times.size()));
  std::vector<double> x;
  x.reserve(passage_times.size());
  for (double t : passage_times) x.push_back((1.0 - rho) * nu * t);
  return stats::ks_test(std::move(x), exp_cdf);
}

stats::KsResult test_scaled_gaps(const ScaledUpcrossings& scaled, double rho, double resolution) {
  if (scaled.times.size() < 2) throw InsufficientData("need at least two upcrossings for gaps");
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("rho must lie in [0, 1)");
  std::vector<double> gaps;
  gaps.reserve(scaled.times.size() - 1);
  for (std::size_t i = 1; i < scaled.times.size(); ++i) {
    const double gap = scaled.times[i] - scaled.times[i - 1];
    gaps.push_back(gap < resolution ? 0.0 : gap);
  }
  if (rho == 0.0 && resolution == 0.0) return stats::ks_test(std::move(gaps), exp_cdf);
  // Atom rho at 0, so D- uses the left limit F(x-).
  const double a = 1.0 - rho;
  auto cdf = [&](double x) { return x < 0.0 ? 0.0 : rho + a * (1.0 - std::exp(-a * x)); };
  std::sort(gaps.begin(), gaps.end());
  const double n = static_cast<double>(gaps.size());
  double d = 0.0;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    const double left = gaps[i] > 0.0 ? cdf(gaps[i]) : 0.0;
    d = std::max({d, (i + 1) / n - cdf(gaps[i]), left - i / n});
  }
  return {d, stats::kolmogorov_survival(std::sqrt(n) * d), gaps.size()};
}

stats::ChiSquareResult test_window_counts(const ScaledUpcrossings& scaled, double window, double rho,
                                          int fitted_params) {
  if (!(window > 0.0)) throw ConfigError("window must be positive");
  const auto n = static_cast<std::size_t>(std::floor(scaled.horizon / window));
  if (n == 0) throw InsufficientData("scaled horizon shorter than one window");
  std::vector<std::uint64_t> counts(n, 0);
  for (double t : scaled.times) {
    const auto i = static_cast<std::size_t>(std::floor(t / window));
    if (i < n) ++counts[i];
  }
  const std::uint64_t kmax = *std::max_element(counts.begin(), counts.end());
  std::vector<double> obs(kmax + 2, 0.0);
  for (auto c : counts) obs[c] += 1.0;
  const auto pmf = window_count_pmf(rho, window, kmax);
  std::vector<double> exp(kmax + 2, 0.0);
  double mass = 0.0;
  for (std::size_t k = 0; k <= kmax; ++k) {
    exp[k] = static_cast<double>(n) * pmf[k];
    mass += pmf[k];
  }
  exp[kmax + 1] = static_cast<double>(n) * std::max(0.0, 1.0 - mass);
  return stats::chi_square(obs, exp, fitted_params);
}

stats::ChiSquareResult test_geometric_cycles(const CycleCountStats& stats, const GammaEstimate& gamma) {
  std::uint64_t m = 0;
  for (std::size_t k = 1; k < stats.histogram.size(); ++k) m += stats.histogram[k];
  if (m < 100) throw InsufficientData("need at least 100 positive cycles, got " + std::to_string(m));
  const std::size_t kmax = stats.histogram.size() - 1;
  const double g = gamma.gamma;
  std::vector<double> obs, exp;
  for (std::size_t k = 1; k <= kmax; ++k) {
    obs.push_back(static_cast<double>(stats.histogram[k]));
    exp.push_back(static_cast<double>(m) * (1.0 - g) * std::pow(g, static_cast<double>(k - 1)));
  }
  obs.push_back(0.0);
  exp.push_back(static_cast<double>(m) * std::pow(g, static_cast<double>(kmax)));
  return stats::chi_square(obs, exp, 1);
}

std::vector<LaplaceGap> laplace_functional_distance(const std::vector<std::vector<double>>& batches, double rho,
                                                    const std::vector<LaplaceProbe>& grid) {
  if (batches.size() < 2) throw InsufficientData("need at least two batches");
  std::vector<LaplaceGap> out;
  std::vector<double> v(batches.size());
  for (const auto& probe : grid) {
    if (!(probe.hi >= probe.lo)) throw ConfigError("probe set B must have lo <= hi");
    for (std::size_t i = 0; i < batches.size(); ++i) {
      double c = 0.0;
      for (double t : batches[i])
        if (t >= probe.lo && t < probe.hi) c += 1.0;
      v[i] = std::exp(-probe.z * c);
    }
    const auto ms = stats::mean_se(v);
    LaplaceGap g;
    g.probe = probe;
    g.empirical = ms.mean;
    g.se = ms.se;
    g.theoretical = laplace_count(rho, probe.hi - probe.lo, probe.z);
    const double diff = g.empirical - g.theoretical;
    g.gap = diff == 0.0 ? 0.0 : diff / g.se;
    g.batches = batches.size();
    out.push_back(g);
  }
  return out;
}

}  // namespace pdmp
