#include "pdmp/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "pdmp/errors.hpp"
#include "pdmp/stats.hpp"

namespace pdmp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

// Groups per-state values by batch id into (sum, count) pairs.
stats::RatioEstimate grouped_mean(const std::vector<StateSample>& states, const std::vector<double>& values) {
  std::uint64_t max_batch = 0;
  for (const auto& s : states) max_batch = std::max(max_batch, s.batch);
  std::vector<double> y(states.empty() ? 0 : max_batch + 1, 0.0);
  std::vector<double> n(y.size(), 0.0);
  for (std::size_t i = 0; i < states.size(); ++i) {
    y[states[i].batch] += values[i];
    n[states[i].batch] += 1.0;
  }
  return stats::ratio_estimate(y, n);
}

IntensityEstimate make_intensity(double u, IntensityEstimate::Kind kind, const std::vector<double>& y,
                                 const std::vector<double>& l) {
  const auto r = stats::ratio_estimate(y, l);
  return {u, kind, r.estimate, r.se, r.numerator, r.denominator};
}

}  // namespace

// ---------------------------------------------------------------------------
// FoldData

double FoldData::observed_time() const {
  double t = 0.0;
  for (double l : length) t += l;
  return t;
}

std::size_t FoldData::level_index(double u) const {
  for (std::size_t i = 0; i < config.levels.size(); ++i)
    if (config.levels[i] == u) return i;
  throw std::invalid_argument("level " + fmt(u) + " was not folded");
}

void FoldData::merge(const FoldData& other) {
  if (other.config.levels != config.levels || other.config.density_grid != config.density_grid ||
      other.config.bandwidth != config.bandwidth || other.config.record_up_times != config.record_up_times)
    throw std::invalid_argument("merge: fold configurations differ");
  const std::uint64_t offset = batches();
  start.insert(start.end(), other.start.begin(), other.start.end());
  length.insert(length.end(), other.length.begin(), other.length.end());
  counts.insert(counts.end(), other.counts.begin(), other.counts.end());
  occupation.insert(occupation.end(), other.occupation.begin(), other.occupation.end());
  jumps.insert(jumps.end(), other.jumps.begin(), other.jumps.end());
  for (auto s : other.states) {
    s.batch += offset;
    states.push_back(s);
  }
  up_times.resize(config.record_up_times.size());
  for (std::size_t i = 0; i < other.up_times.size(); ++i)
    up_times[i].insert(up_times[i].end(), other.up_times[i].begin(), other.up_times[i].end());
  burn_in_time += other.burn_in_time;
  trailing_time += other.trailing_time;
  auto add = [](std::vector<LevelCounts>& a, const std::vector<LevelCounts>& b) {
    a.resize(std::max(a.size(), b.size()));
    for (std::size_t i = 0; i < b.size(); ++i) {
      a[i].cont_up += b[i].cont_up;
      a[i].cont_down += b[i].cont_down;
      a[i].disc_up += b[i].disc_up;
      a[i].disc_down += b[i].disc_down;
    }
  };
  add(burn_in_counts, other.burn_in_counts);
  add(trailing_counts, other.trailing_counts);
}

// ---------------------------------------------------------------------------
// PathFold

PathFold::PathFold(const FlowSolver& flow, FoldConfig config, const RngConfig& rng)
    : flow_(&flow), sampling_(rng, SubStream::state_sampling) {
  if (!config.density_grid.empty() && !(config.bandwidth > 0.0))
    throw ConfigError("density grid needs a positive bandwidth");
  if (!config.base_level && !(config.batch_time > 0.0)) throw ConfigError("batch_time must be positive");
  if (config.sample_rate < 0.0) throw ConfigError("sample_rate must be non-negative");
  if (config.base_level) base_.emplace(flow, *config.base_level);
  for (double u : config.levels) scanners_.emplace_back(flow, u);
  for (double u : config.record_up_times) up_scanners_.emplace_back(flow, u);
  data_.config = std::move(config);
  data_.up_times.resize(data_.config.record_up_times.size());
  cur_counts_.assign(data_.config.levels.size(), {});
  cur_occ_.assign(data_.config.density_grid.size(), 0.0);
  started_ = !data_.config.base_level.has_value();
  next_sample_ = data_.config.sample_rate > 0.0 ? sampling_.exponential() / data_.config.sample_rate : kInf;
}

void PathFold::close_batch(double at) {
  if (started_) {
    const std::uint64_t id = data_.batches();
    data_.start.push_back(batch_start_);
    data_.length.push_back(at - batch_start_);
    data_.counts.insert(data_.counts.end(), cur_counts_.begin(), cur_counts_.end());
    data_.occupation.insert(data_.occupation.end(), cur_occ_.begin(), cur_occ_.end());
    data_.jumps.push_back(cur_jumps_);
    for (auto s : cur_states_) {
      s.batch = id;
      data_.states.push_back(s);
    }
  } else {
    data_.burn_in_time = at;
    data_.burn_in_counts = cur_counts_;
    started_ = true;
  }
  std::fill(cur_counts_.begin(), cur_counts_.end(), LevelCounts{});
  std::fill(cur_occ_.begin(), cur_occ_.end(), 0.0);
  cur_jumps_ = 0.0;
  cur_states_.clear();
  batch_start_ = at;
}

bool PathFold::operator()(const Segment& s) {
  const FoldConfig& cfg = data_.config;
  const double t0 = s.t0;
  const double t1 = s.t1();

  // Batch boundaries inside (t0, t1].
  std::vector<double> cuts;
  if (base_) {
    if (auto tb = base_->continuous_time(s)) cuts.push_back(*tb);
  } else {
    while (static_cast<double>(next_batch_boundary_) * cfg.batch_time <= t1) {
      cuts.push_back(static_cast<double>(next_batch_boundary_) * cfg.batch_time);
      ++next_batch_boundary_;
    }
  }

  // Crossing events of the folded levels, in time order per level.
  struct Tagged {
    std::size_t level;
    CrossingEvent e;
  };
  std::vector<Tagged> events;
  CrossingEvent buf[2];
  for (std::size_t i = 0; i < scanners_.size(); ++i) {
    const int n = scanners_[i].scan(s, buf);
    for (int k = 0; k < n; ++k) events.push_back({i, buf[k]});
  }
  for (std::size_t i = 0; i < up_scanners_.size(); ++i) {
    const int n = up_scanners_[i].scan(s, buf);
    for (int k = 0; k < n; ++k)
      if (is_up(buf[k].kind)) data_.up_times[i].push_back(buf[k].time);
  }

  const double h = cfg.bandwidth;
  auto occupation_until = [&](std::size_t g, double t) {
    const double c = cfg.density_grid[g];
    return flow_->occupation_time(s.x0, c - h, c + h, t - t0);
  };
  std::vector<double> occ_prev(cfg.density_grid.size(), 0.0);

  double a = t0;
  for (std::size_t p = 0; p <= cuts.size(); ++p) {
    const double c = p < cuts.size() ? cuts[p] : t1;
    for (const auto& ev : events) {
      if (ev.e.time > a && ev.e.time <= c) {
        auto& lc = cur_counts_[ev.level];
        switch (ev.e.kind) {
          case CrossingKind::continuous_up: ++lc.cont_up; break;
          case CrossingKind::continuous_down: ++lc.cont_down; break;
          case CrossingKind::discontinuous_up: ++lc.disc_up; break;
          case CrossingKind::discontinuous_down: ++lc.disc_down; break;
        }
      }
    }
    for (std::size_t g = 0; g < cfg.density_grid.size(); ++g) {
      const double upto = occupation_until(g, c);
      cur_occ_[g] += upto - occ_prev[g];
      occ_prev[g] = upto;
    }
    while (next_sample_ < c) {
      if (next_sample_ >= a && started_) cur_states_.push_back({next_sample_, flow_->flow(s.x0, next_sample_ - t0), 0});
      next_sample_ += sampling_.exponential() / cfg.sample_rate;
    }
    if (p < cuts.size()) {
      if (s.jump && c == t1) ++cur_jumps_;
      close_batch(c);
    }
    a = c;
  }
  // A jump at t1 belongs to the batch containing t1 unless t1 closed that batch.
  if (s.jump && (cuts.empty() || cuts.back() != t1)) ++cur_jumps_;
  last_time_ = t1;
  return true;
}

FoldData PathFold::data() const {
  FoldData out = data_;
  if (started_) {
    out.trailing_time = last_time_ - batch_start_;
    out.trailing_counts = cur_counts_;
  } else {
    out.burn_in_time = last_time_;
    out.burn_in_counts = cur_counts_;
  }
  return out;
}

FoldData fold_run(const Simulator& sim, double x0, const StopRule& stop, const RngConfig& rng,
                  const FoldConfig& config) {
  PathFold fold(sim.flow(), config, rng);
  sim.run(x0, stop, rng, fold.observer());
  return fold.data();
}

FoldData fold_trajectory(const Trajectory& traj, const FoldConfig& config) {
  const FlowSolver flow(traj.model);
  PathFold fold(flow, config, traj.rng);
  traj.for_each_segment([&](const Segment& s) { return fold(s); });
  return fold.data();
}

// ---------------------------------------------------------------------------
// Estimators

std::string to_string(IntensityEstimate::Kind k) {
  switch (k) {
    case IntensityEstimate::Kind::nu: return "nu";
    case IntensityEstimate::Kind::nu_plus_d: return "nu_plus_d";
    case IntensityEstimate::Kind::nu_minus_d: return "nu_minus_d";
    case IntensityEstimate::Kind::nu_plus: return "nu_plus";
  }
  return "?";
}

Intensities estimate_intensities(const FoldData& data, double u, const ModelSpec& spec) {
  if (spec.in_zero_set(u))
    throw ModelValidationError("level " + fmt(u) + " is a zero of mu; intensities are ill-posed there");
  if (data.batches() == 0) throw InsufficientData("no complete batch to estimate intensities from");
  const std::size_t li = data.level_index(u);
  const std::size_t n = data.batches();
  std::vector<double> cont(n), up_d(n), down_d(n), up(n);
  for (std::size_t b = 0; b < n; ++b) {
    const auto& c = data.at(b, li);
    cont[b] = c.continuous();
    up_d[b] = c.disc_up;
    down_d[b] = c.disc_down;
    up[b] = c.up();
  }
  using K = IntensityEstimate::Kind;
  return {make_intensity(u, K::nu, cont, data.length), make_intensity(u, K::nu_plus_d, up_d, data.length),
          make_intensity(u, K::nu_minus_d, down_d, data.length), make_intensity(u, K::nu_plus, up, data.length)};
}

DensityEstimate estimate_density(const FoldData& data, const ModelSpec& spec) {
  const auto& cfg = data.config;
  for (double g : cfg.density_grid)
    for (double z : spec.drift.zeros)
      if (std::abs(g - z) <= cfg.bandwidth)
        throw ConfigError("grid point " + fmt(g) + " lies within the bandwidth of the zero " + fmt(z) + " of mu");
  if (data.batches() == 0) throw InsufficientData("no complete batch to estimate the density from");
  DensityEstimate d;
  d.grid = cfg.density_grid;
  d.bandwidth = cfg.bandwidth;
  d.time = data.observed_time();
  const std::size_t n = data.batches();
  const std::size_t G = cfg.density_grid.size();
  std::vector<double> y(n);
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t b = 0; b < n; ++b) y[b] = data.occupation[b * G + g] / (2.0 * cfg.bandwidth);
    const auto r = stats::ratio_estimate(y, data.length);
    d.value.push_back(r.estimate);
    d.se.push_back(r.se);
  }
  return d;
}

double default_bandwidth(const std::vector<StateSample>& states) {
  if (states.size() < 4) throw InsufficientData("need at least 4 sampled states for a bandwidth");
  std::vector<double> x;
  x.reserve(states.size());
  for (const auto& s : states) x.push_back(s.x);
  const auto quantile = [&](double q) {
    const std::size_t k = static_cast<std::size_t>(q * static_cast<double>(x.size() - 1));
    std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(k), x.end());
    return x[k];
  };
  const double q1 = quantile(0.25);
  const double q3 = quantile(0.75);
  return 0.02 * (q3 - q1);
}

std::vector<RiceRow> rice_residual(const DensityEstimate& density, const std::vector<Intensities>& intensities,
                                   const ModelSpec& spec) {
  if (intensities.size() != density.grid.size())
    throw std::invalid_argument("rice_residual: one intensity set per grid point is required");
  std::vector<RiceRow> rows;
  for (std::size_t i = 0; i < density.grid.size(); ++i) {
    RiceRow r;
    r.u = density.grid[i];
    if (intensities[i].nu.level != r.u) throw std::invalid_argument("rice_residual: intensity level mismatch");
    r.nu = intensities[i].nu.estimate;
    r.nu_se = intensities[i].nu.se;
    r.p = density.value[i];
    r.p_se = density.se[i];
    r.mu = spec.mu(r.u);
    const double diff = r.nu - std::abs(r.mu) * r.p;
    const double se = std::sqrt(r.nu_se * r.nu_se + r.mu * r.mu * r.p_se * r.p_se);
    r.residual = diff == 0.0 ? 0.0 : diff / se;
    r.relative_error = std::abs(diff) / (std::abs(r.mu) * r.p);
    const auto& pd = intensities[i].plus_d;
    const auto& md = intensities[i].minus_d;
    const double bdiff = md.estimate - pd.estimate - r.mu * r.p;
    const double bse = std::sqrt(md.se * md.se + pd.se * pd.se + r.mu * r.mu * r.p_se * r.p_se);
    r.balance_residual = bdiff == 0.0 ? 0.0 : bdiff / bse;
    rows.push_back(r);
  }
  return rows;
}

IntegralIntensities intensity_by_integral(const ModelSpec& spec, const std::vector<StateSample>& states, double u,
                                          const RngConfig& rng) {
  if (states.empty()) throw InsufficientData("no sampled states");
  Rng draws(rng, SubStream::kernel_draws);
  std::vector<double> up(states.size()), down(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const double x = states[i].x;
    const double z = spec.kernel->sample(x, draws);
    const double lam = spec.lambda(x);
    up[i] = (x < u && u <= x + z) ? lam : 0.0;
    down[i] = (x + z < u && u <= x) ? lam : 0.0;
  }
  const auto ru = grouped_mean(states, up);
  const auto rd = grouped_mean(states, down);
  using K = IntensityEstimate::Kind;
  return {{u, K::nu_plus_d, ru.estimate, ru.se, ru.numerator, ru.denominator},
          {u, K::nu_minus_d, rd.estimate, rd.se, rd.numerator, rd.denominator}};
}

StateMean state_mean(const std::vector<StateSample>& states, const std::function<double(double)>& g) {
  if (states.empty()) throw InsufficientData("no sampled states");
  std::vector<double> v(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) v[i] = g(states[i].x);
  const auto r = grouped_mean(states, v);
  return {r.estimate, r.se, states.size()};
}

LambdaPi compare_lambda_pi(const FoldData& data, const ModelSpec& spec) {
  LambdaPi out;
  out.by_states = state_mean(data.states, [&](double x) { return spec.lambda(x); });
  const auto r = stats::ratio_estimate(data.jumps, data.length);
  out.by_count = r.estimate;
  out.by_count_se = r.se;
  const double se = std::hypot(out.by_states.se, out.by_count_se);
  const double diff = out.by_states.mean - out.by_count;
  out.standardized_gap = diff == 0.0 ? 0.0 : diff / se;
  return out;
}

CycleCountStats cycle_count_stats(const std::vector<std::uint64_t>& counts, double level) {
  CycleCountStats s;
  s.level = level;
  s.cycles = counts.size();
  std::vector<double> v;
  v.reserve(counts.size());
  for (auto k : counts) {
    if (k >= s.histogram.size()) s.histogram.resize(k + 1, 0);
    ++s.histogram[k];
    s.total += k;
    v.push_back(static_cast<double>(k));
  }
  if (!v.empty()) {
    const auto m = stats::mean_se(v);
    s.mean = m.mean;
    s.mean_se = m.se;
  }
  return s;
}

CycleCountStats cycle_count_stats(const FoldData& data, double b) {
  const std::size_t li = data.level_index(b);
  std::vector<std::uint64_t> counts(data.batches());
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] = data.at(i, li).continuous();
  return cycle_count_stats(counts, b);
}

GammaEstimate gamma_hat(const CycleCountStats& stats, double base) {
  GammaEstimate g;
  g.base = base;
  g.target = stats.level;
  std::uint64_t m = 0;
  for (std::size_t k = 1; k < stats.histogram.size(); ++k) m += stats.histogram[k];
  if (m == 0) throw InsufficientData("no cycle reaches the target level");
  g.positive_cycles = m;
  g.sufficient = m >= 30;
  const double p = static_cast<double>(m) / static_cast<double>(stats.total);
  g.gamma = 1.0 - p;
  g.se = p * std::sqrt(g.gamma / static_cast<double>(m));
  return g;
}

ZeroFractionCheck zero_fraction_check(const CycleCountStats& stats, const GammaEstimate& gamma, double ratio,
                                      double ratio_se) {
  std::uint64_t n = 0;
  for (auto c : stats.histogram) n += c;
  if (n == 0) throw InsufficientData("no cycles");
  ZeroFractionCheck z;
  z.observed = static_cast<double>(stats.histogram.empty() ? 0 : stats.histogram[0]) / static_cast<double>(n);
  z.predicted = 1.0 - ratio * (1.0 - gamma.gamma);
  const double se_obs2 = z.observed * (1.0 - z.observed) / static_cast<double>(n);
  const double se_pred2 = std::pow((1.0 - gamma.gamma) * ratio_se, 2) + std::pow(ratio * gamma.se, 2);
  z.se = std::sqrt(se_obs2 + se_pred2);
  const double diff = z.observed - z.predicted;
  z.standardized_gap = diff == 0.0 ? 0.0 : diff / z.se;
  return z;
}

TestFunction bump_test_function(double centre, double half_width) {
  if (!(half_width > 0.0)) throw ConfigError("bump half-width must be positive");
  TestFunction t;
  t.name = "bump(" + fmt(centre) + "," + fmt(half_width) + ")";
  t.df = [=](double x) {
    const double s = (x - centre) / half_width;
    if (std::abs(s) >= 1.0) return 0.0;
    const double w = 1.0 - s * s;
    return w * w;
  };
  t.f = [=](double x) {
    const double s = (x - centre) / half_width;
    if (s <= -1.0) return 0.0;
    if (s >= 1.0) return half_width * 16.0 / 15.0;
    const double s3 = s * s * s;
    return half_width * (s - 2.0 * s3 / 3.0 + s3 * s * s / 5.0 + 8.0 / 15.0);
  };
  return t;
}

std::vector<StationarityResidual> stationarity_residual(const ModelSpec& spec, const std::vector<StateSample>& states,
                                                        const std::vector<TestFunction>& family,
                                                        const RngConfig& rng) {
  if (states.empty()) throw InsufficientData("no sampled states");
  Rng draws(rng, SubStream::kernel_draws);
  std::vector<double> z(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) z[i] = spec.kernel->sample(states[i].x, draws);
  std::vector<StationarityResidual> out;
  std::vector<double> lhs(states.size()), rhs(states.size()), diff(states.size());
  for (const auto& tf : family) {
    for (std::size_t i = 0; i < states.size(); ++i) {
      const double x = states[i].x;
      lhs[i] = tf.df(x) * spec.mu(x);
      rhs[i] = spec.lambda(x) * (tf.f(x) - tf.f(x + z[i]));
      diff[i] = lhs[i] - rhs[i];
    }
    StationarityResidual r;
    r.name = tf.name;
    r.n = states.size();
    r.lhs = grouped_mean(states, lhs).estimate;
    r.rhs = grouped_mean(states, rhs).estimate;
    const auto d = grouped_mean(states, diff);
    r.se = d.se;
    r.residual = d.numerator == 0.0 ? 0.0 : d.estimate / d.se;
    out.push_back(r);
  }
  return out;
}

}  // namespace pdmp
