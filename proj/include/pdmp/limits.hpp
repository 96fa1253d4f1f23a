#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pdmp/estimate.hpp"
#include "pdmp/model.hpp"
#include "pdmp/rng.hpp"
#include "pdmp/simulate.hpp"
#include "pdmp/stats.hpp"

namespace pdmp {

struct CompoundPoissonParams {
  double rho = 0.0;
  std::optional<double> w;
  double w_residual = 0.0;  ///< |E e^{w xi} - 1 + w mu/lambda| at the returned w
  Scenario scenario = Scenario::S1;
  double margin = 0.0;
  std::vector<double> bracket;  ///< scanned points of the root search, if any
};

/// rho = 0 in S1/S2; in S3 either the plug-in -(lambda/mu) E xi (mu(inf) < 0)
/// or the positive root w of E e^{w xi} - 1 + w mu/lambda (mu(inf) > 0).
CompoundPoissonParams compute_rho(const ModelSpec& spec);
CompoundPoissonParams compute_rho(const ModelSpec& spec, const ScenarioReport& report);

/// Root of E e^{w xi} - 1 + w m = 0 on (0, w_max) with m = mu(inf)/lambda(inf) > 0.
/// Throws ModelValidationError when no sign change is found.
double solve_w(const JumpLaw& xi, double drift_over_rate, std::vector<double>* scanned = nullptr);

/// Points of Pi_rho on [0, horizon] with their multiplicities.
struct GeomCPPath {
  double rho = 0.0;
  double horizon = 0.0;
  std::vector<double> times;
  std::vector<std::uint32_t> multiplicity;

  std::uint64_t total() const;
  std::uint64_t count(double a, double b) const;  ///< mass in (a, b]
};

/// Multiplicity k >= 1 with P(k) = (1 - rho) rho^(k-1).
std::uint32_t sample_multiplicity(double rho, Rng& rng);

GeomCPPath simulate_geom_cpp(double rho, double horizon, Rng& rng);

/// Pi_rho(B) for one window of Lebesgue size len; optionally appends the
/// multiplicities of its atoms.
std::uint64_t sample_window_count(double rho, double len, Rng& rng, std::vector<std::uint32_t>* atoms = nullptr);

/// E exp(-z Pi_rho(B)) for |B| = len.
double laplace_count(double rho, double len, double z);

/// P(Pi_rho(B) = k) for |B| = len (Polya-Aeppli law), k = 0..kmax.
std::vector<double> window_count_pmf(double rho, double len, std::size_t kmax);

struct LawValue {
  double value = 0.0;
  double se = 0.0;  ///< 0 for closed forms
};

/// P(Pi_rho((1 - rho)^-1 s) <= n - 1). Closed forms for n <= 3 and for rho = 0;
/// Monte Carlo with mc_samples windows otherwise.
LawValue gamma_law_cdf(double rho, unsigned n, double s, std::uint64_t mc_samples = 100000, RngConfig rng = {});

struct ScaledUpcrossings {
  double level = 0.0;
  IntensityEstimate intensity;
  std::vector<double> times;  ///< nu_+ times each upcrossing epoch
  double horizon = 0.0;       ///< scaled end of observation
};

/// Throws InsufficientData when the intensity estimate is not positive.
ScaledUpcrossings scale_upcrossings(const std::vector<double>& up_times, double horizon,
                                    const IntensityEstimate& nu_plus);
ScaledUpcrossings scale_upcrossings(const Trajectory& traj, double b, const IntensityEstimate& nu_plus);

/// KS of (1 - rho) nu T_i against Exp(1). Throws InsufficientData below 200 samples.
stats::KsResult test_exponential_first_passage(const std::vector<double>& passage_times, double rho, double nu);

/// KS of consecutive scaled gaps against the gap law of Pi_rho: an atom rho
/// at 0 and Exp(1 - rho) otherwise (Exp(1) when rho = 0). Gaps below
/// resolution count as 0: at finite b the gaps inside a cluster are small but
/// positive. The p-value is conservative when rho > 0.
stats::KsResult test_scaled_gaps(const ScaledUpcrossings& scaled, double rho = 0.0, double resolution = 0.0);

/// Chi-square of counts in consecutive scaled windows of the given length
/// against the Pi_rho window law. One fitted parameter by default, since the
/// scaling intensity is usually estimated from the same path.
stats::ChiSquareResult test_window_counts(const ScaledUpcrossings& scaled, double window, double rho,
                                          int fitted_params = 1);

/// Chi-square of positive-cycle counts against the zero-truncated geometric
/// with parameter 1 - gamma; df = bins - 2. Throws InsufficientData below 100
/// positive cycles.
stats::ChiSquareResult test_geometric_cycles(const CycleCountStats& stats, const GammaEstimate& gamma);

struct LaplaceProbe {
  double z = 0.0;
  double lo = 0.0;
  double hi = 1.0;
};

struct LaplaceGap {
  LaplaceProbe probe;
  double empirical = 0.0;
  double se = 0.0;
  double theoretical = 0.0;
  double gap = 0.0;
  std::size_t batches = 0;
};

/// Each batch holds scaled point times relative to its own origin. Compares
/// the batch mean of exp(-z M(B)) with laplace_count(rho, |B|, z).
std::vector<LaplaceGap> laplace_functional_distance(const std::vector<std::vector<double>>& batches, double rho,
                                                    const std::vector<LaplaceProbe>& grid);

}  // namespace pdmp
