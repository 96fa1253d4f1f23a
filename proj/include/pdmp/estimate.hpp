#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pdmp/flow.hpp"
#include "pdmp/simulate.hpp"

namespace pdmp {

/// What a PathFold collects per batch. Batches are regeneration cycles at
/// base_level (after burn-in up to its first continuous crossing) or, without a
/// base level, consecutive time windows of length batch_time.
struct FoldConfig {
  std::optional<double> base_level;
  double batch_time = 100.0;
  std::vector<double> levels;        ///< crossing levels counted per batch
  std::vector<double> density_grid;  ///< band centres for occupation times
  double bandwidth = 0.0;            ///< half-width h of the bands
  double sample_rate = 0.0;          ///< Poisson state-sampling rate, 0 disables
  std::vector<double> record_up_times;  ///< levels whose upcrossing epochs are kept
};

struct LevelCounts {
  std::uint32_t cont_up = 0;
  std::uint32_t cont_down = 0;
  std::uint32_t disc_up = 0;
  std::uint32_t disc_down = 0;

  std::uint32_t continuous() const { return cont_up + cont_down; }
  std::uint32_t up() const { return cont_up + disc_up; }
};

struct StateSample {
  double time = 0.0;
  double x = 0.0;
  std::uint64_t batch = 0;
};

/// Per-batch rows of a folded path. Only complete batches are kept; the
/// burn-in and the trailing partial batch are summarised separately.
struct FoldData {
  FoldConfig config;
  std::vector<double> start;
  std::vector<double> length;
  std::vector<LevelCounts> counts;  ///< batches x levels
  std::vector<double> occupation;   ///< batches x grid points
  std::vector<double> jumps;        ///< jump count per batch
  std::vector<StateSample> states;  ///< samples inside complete batches
  std::vector<std::vector<double>> up_times;  ///< per record level, whole path
  double burn_in_time = 0.0;
  double trailing_time = 0.0;
  std::vector<LevelCounts> burn_in_counts;
  std::vector<LevelCounts> trailing_counts;

  std::size_t batches() const { return length.size(); }
  double observed_time() const;
  std::size_t level_index(double u) const;  ///< throws std::invalid_argument if not folded
  const LevelCounts& at(std::size_t batch, std::size_t level) const {
    return counts[batch * config.levels.size() + level];
  }

  /// Appends the batches of an independent run with the same configuration.
  void merge(const FoldData& other);
};

/// Streaming observer that folds segments into FoldData.
class PathFold {
 public:
  PathFold(const FlowSolver& flow, FoldConfig config, const RngConfig& rng);

  bool operator()(const Segment& s);
  SegmentObserver observer() {
    return [this](const Segment& s) { return (*this)(s); };
  }
  /// Snapshot including the current trailing partial batch summary.
  FoldData data() const;
  /// Complete batches and recorded upcrossings so far, without copying.
  const FoldData& current() const { return data_; }

 private:
  void close_batch(double at);

  const FlowSolver* flow_;
  FoldData data_;
  std::optional<CrossingScanner> base_;
  std::vector<CrossingScanner> scanners_;
  std::vector<CrossingScanner> up_scanners_;
  Rng sampling_;
  double next_sample_ = 0.0;
  bool started_ = false;
  double batch_start_ = 0.0;
  std::vector<LevelCounts> cur_counts_;
  std::vector<double> cur_occ_;
  double cur_jumps_ = 0.0;
  std::vector<StateSample> cur_states_;
  double last_time_ = 0.0;
  std::uint64_t next_batch_boundary_ = 1;
};

/// Runs the simulator with a PathFold attached and returns the folded data.
FoldData fold_run(const Simulator& sim, double x0, const StopRule& stop, const RngConfig& rng,
                  const FoldConfig& config);
/// Folds a stored trajectory.
FoldData fold_trajectory(const Trajectory& traj, const FoldConfig& config);

struct IntensityEstimate {
  enum class Kind { nu, nu_plus_d, nu_minus_d, nu_plus };
  double level = 0.0;
  Kind kind = Kind::nu;
  double estimate = 0.0;
  double se = 0.0;
  double count = 0.0;
  double time = 0.0;
};
std::string to_string(IntensityEstimate::Kind k);

struct Intensities {
  IntensityEstimate nu, plus_d, minus_d, plus;
};

/// Crossing intensities at u with regenerative (or batch) standard errors.
/// Throws ModelValidationError when u is a zero of mu.
Intensities estimate_intensities(const FoldData& data, double u, const ModelSpec& spec);

struct DensityEstimate {
  std::vector<double> grid;
  double bandwidth = 0.0;
  std::vector<double> value;
  std::vector<double> se;
  double time = 0.0;
};

/// Occupation-time band density. Throws ConfigError when a grid point lies
/// within h of a zero of mu.
DensityEstimate estimate_density(const FoldData& data, const ModelSpec& spec);

/// 0.02 times the interquartile range of the sampled states.
double default_bandwidth(const std::vector<StateSample>& states);

struct RiceRow {
  double u = 0.0;
  double nu = 0.0, nu_se = 0.0;
  double p = 0.0, p_se = 0.0;
  double mu = 0.0;
  double residual = 0.0;          ///< (nu - |mu| p) / pooled se
  double relative_error = 0.0;    ///< |nu - |mu| p| / (|mu| p)
  double balance_residual = 0.0;  ///< (nu_-d - nu_+d - mu p) / pooled se
};

/// Rice residuals on the density grid. Intensities must be given in grid order.
std::vector<RiceRow> rice_residual(const DensityEstimate& density, const std::vector<Intensities>& intensities,
                                   const ModelSpec& spec);

/// Monte Carlo of the jump-crossing integrals over sampled states with one
/// kernel draw per state. Standard errors group states by batch.
struct IntegralIntensities {
  IntensityEstimate plus_d, minus_d;
};
IntegralIntensities intensity_by_integral(const ModelSpec& spec, const std::vector<StateSample>& states, double u,
                                          const RngConfig& rng);

/// Mean of g over sampled states with a batch-grouped standard error.
struct StateMean {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};
StateMean state_mean(const std::vector<StateSample>& states, const std::function<double(double)>& g);

/// Two estimates of the mean jump rate under the invariant law: state average
/// of lambda and jump count over observed time.
struct LambdaPi {
  StateMean by_states;
  double by_count = 0.0;
  double by_count_se = 0.0;
  double standardized_gap = 0.0;
};
LambdaPi compare_lambda_pi(const FoldData& data, const ModelSpec& spec);

struct CycleCountStats {
  double level = 0.0;
  std::vector<std::uint64_t> histogram;  ///< histogram[k] = cycles with k crossings
  std::uint64_t cycles = 0;
  std::uint64_t total = 0;  ///< crossings summed over cycles
  double mean = 0.0;
  double mean_se = 0.0;
};
CycleCountStats cycle_count_stats(const std::vector<std::uint64_t>& counts, double level = 0.0);
/// Per-cycle N^b (continuous crossings of b) from folded cycles.
CycleCountStats cycle_count_stats(const FoldData& data, double b);

struct GammaEstimate {
  double base = 0.0;
  double target = 0.0;
  double gamma = 0.0;
  double se = 0.0;
  std::uint64_t positive_cycles = 0;
  bool sufficient = false;  ///< at least 30 positive cycles
};
/// Zero-truncated geometric MLE: gamma = 1 - m / sum(k) over positive cycles.
/// Throws InsufficientData when no cycle has a positive count.
GammaEstimate gamma_hat(const CycleCountStats& stats, double base = 0.0);

/// Zero-cycle fraction against 1 - r (1 - gamma), with r = nu(b)/nu(u) taken
/// from an independent estimate.
struct ZeroFractionCheck {
  double observed = 0.0;
  double predicted = 0.0;
  double se = 0.0;
  double standardized_gap = 0.0;
};
ZeroFractionCheck zero_fraction_check(const CycleCountStats& stats, const GammaEstimate& gamma, double ratio,
                                      double ratio_se);

struct TestFunction {
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> df;
};
/// f' = (1 - s^2)^2 on |s| <= 1, s = (x - centre) / half_width, f = 0 to the left.
TestFunction bump_test_function(double centre, double half_width);

struct StationarityResidual {
  std::string name;
  double lhs = 0.0;  ///< mean of f' mu
  double rhs = 0.0;  ///< mean of lambda (f(x) - f(x + z))
  double se = 0.0;   ///< batch-grouped se of the difference
  double residual = 0.0;
  std::size_t n = 0;
};
std::vector<StationarityResidual> stationarity_residual(const ModelSpec& spec, const std::vector<StateSample>& states,
                                                        const std::vector<TestFunction>& family,
                                                        const RngConfig& rng);

}  // namespace pdmp
