#include "pdmp/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pdmp/errors.hpp"

namespace pdmp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

std::string to_string(CrossingKind k) {
  switch (k) {
    case CrossingKind::continuous_up: return "continuous_up";
    case CrossingKind::continuous_down: return "continuous_down";
    case CrossingKind::discontinuous_up: return "discontinuous_up";
    case CrossingKind::discontinuous_down: return "discontinuous_down";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// CrossingScanner

CrossingScanner::CrossingScanner(const FlowSolver& flow, double u) : flow_(&flow), u_(u) {
  if (flow.spec().in_zero_set(u))
    throw ModelValidationError("level " + fmt(u) + " is a zero of mu; continuous crossings are ill-posed there");
}

std::optional<double> CrossingScanner::continuous_time(const Segment& s) const {
  if (s.x0 == u_ || s.x_end == s.x0) return std::nullopt;
  const double lo = std::min(s.x0, s.x_end);
  const double hi = std::max(s.x0, s.x_end);
  if (u_ < lo || u_ > hi) return std::nullopt;
  if (s.x_end == u_) return s.t1();
  const auto h = flow_->hit_time(s.x0, u_);
  return s.t0 + std::min(h.value_or(s.duration), s.duration);
}

int CrossingScanner::scan(const Segment& s, CrossingEvent out[2]) const {
  int n = 0;
  if (auto t = continuous_time(s)) {
    out[n++] = {u_, *t, s.x_end > s.x0 ? CrossingKind::continuous_up : CrossingKind::continuous_down};
  }
  if (s.jump) {
    const double pre = s.x_end;
    const double post = s.x_end + *s.jump;
    if (post >= u_ && u_ > pre) out[n++] = {u_, s.t1(), CrossingKind::discontinuous_up};
    else if (pre >= u_ && u_ > post) out[n++] = {u_, s.t1(), CrossingKind::discontinuous_down};
  }
  return n;
}

// ---------------------------------------------------------------------------
// StopRule

StopRule StopRule::at_horizon(double t) {
  if (!(t > 0.0)) throw ConfigError("horizon must be positive, got " + fmt(t));
  StopRule r;
  r.kind = Kind::horizon;
  r.horizon = t;
  return r;
}

StopRule StopRule::after_events(std::uint64_t n) {
  if (n == 0) throw ConfigError("n_events must be positive");
  StopRule r;
  r.kind = Kind::n_events;
  r.count = n;
  return r;
}

StopRule StopRule::after_cycles(std::uint64_t n, double u) {
  if (n == 0) throw ConfigError("n_cycles must be positive");
  StopRule r;
  r.kind = Kind::n_cycles;
  r.count = n;
  r.level = u;
  return r;
}

std::string StopRule::describe() const {
  switch (kind) {
    case Kind::horizon: return "horizon=" + fmt(horizon);
    case Kind::n_events: return "n_events=" + std::to_string(count);
    case Kind::n_cycles: return "n_cycles=" + std::to_string(count) + " at u=" + fmt(level);
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Simulator

Simulator::Simulator(ModelPtr spec, FlowOptions options) : flow_(std::move(spec), options) {}

RunSummary Simulator::run(double x0, const StopRule& stop, const RngConfig& rng,
                          const SegmentObserver& observer) const {
  const ModelSpec& s = flow_.spec();
  if (!s.working_interval.contains(x0))
    throw ConfigError("x0 = " + fmt(x0) + " lies outside the working interval");
  Rng marks(rng, SubStream::exponential_marks);
  Rng sizes(rng, SubStream::jump_sizes);
  std::optional<CrossingScanner> base;
  if (stop.kind == StopRule::Kind::n_cycles) base.emplace(flow_, stop.level);
  const double end = std::min(stop.time_limit, stop.kind == StopRule::Kind::horizon ? stop.horizon : kInf);

  RunSummary summary;
  double t = 0.0;
  double x = x0;
  for (;;) {
    const double remaining = end - t;
    if (remaining <= 0.0) break;
    const double e = marks.exponential();
    const Advance adv = flow_.advance(x, e, remaining >= 1e299 ? kInf : remaining);
    Segment seg{t, x, adv.wait, adv.x_end, std::nullopt};

    if (base) {
      if (auto ct = base->continuous_time(seg)) {
        ++summary.base_crossings;
        if (summary.base_crossings == stop.count + 1) {
          seg.duration = *ct - t;
          seg.x_end = stop.level;
          observer(seg);
          summary.end_time = *ct;
          summary.x_final = stop.level;
          return summary;
        }
      }
    }
    double z = 0.0;
    if (adv.jumped) {
      z = s.kernel->sample(adv.x_end, sizes);
      seg.jump = z;
    }
    t += adv.wait;
    x = adv.x_end + z;
    summary.end_time = t;
    summary.x_final = x;
    if (adv.jumped) ++summary.jumps;
    if (!observer(seg)) {
      summary.stopped_by_observer = true;
      return summary;
    }
    if (adv.jumped && !s.working_interval.contains(x))
      throw LeftWorkingInterval("jump at t=" + fmt(t) + " lands at " + fmt(x) + ", outside the working interval");
    if (!adv.jumped) break;
    if (stop.kind == StopRule::Kind::n_events && summary.jumps == stop.count) break;
  }
  return summary;
}

Trajectory Simulator::simulate(double x0, const StopRule& stop, const RngConfig& rng) const {
  Trajectory traj;
  traj.model = flow_.model();
  traj.x0 = x0;
  traj.rng = rng;
  traj.stop = stop;
  const auto summary = run(x0, stop, rng, [&](const Segment& seg) {
    if (seg.jump) traj.jumps.push_back({seg.t1(), seg.x_end, *seg.jump});
    return true;
  });
  traj.horizon = summary.end_time;
  traj.x_final = summary.x_final;
  return traj;
}

// ---------------------------------------------------------------------------
// Trajectory

void Trajectory::for_each_segment(const std::function<bool(const Segment&)>& fn) const {
  double t = 0.0;
  double x = x0;
  for (const auto& j : jumps) {
    if (!fn(Segment{t, x, j.time - t, j.x_pre, j.size})) return;
    t = j.time;
    x = j.x_post();
  }
  if (horizon > t) fn(Segment{t, x, horizon - t, x_final, std::nullopt});
}

std::vector<std::string> Trajectory::verify(const FlowSolver& flow, double tol) const {
  std::vector<std::string> problems;
  double t = 0.0;
  double x = x0;
  for (std::size_t i = 0; i < jumps.size(); ++i) {
    const auto& j = jumps[i];
    if (!(j.time > t) && i > 0) problems.push_back("jump " + std::to_string(i) + " is not after its predecessor");
    if (j.time > horizon) problems.push_back("jump " + std::to_string(i) + " after the horizon");
    if (j.size == 0.0) problems.push_back("jump " + std::to_string(i) + " has size 0");
    const double q = flow.flow(x, j.time - t);
    if (std::abs(q - j.x_pre) > tol * std::max(1.0, std::abs(q)))
      problems.push_back("jump " + std::to_string(i) + ": stored pre-jump state " + fmt(j.x_pre) +
                         " differs from the flow value " + fmt(q));
    t = j.time;
    x = j.x_post();
  }
  return problems;
}

bool replay_matches(const Trajectory& traj, FlowOptions options) {
  const Simulator sim(traj.model, options);
  const auto again = sim.simulate(traj.x0, traj.stop, traj.rng);
  return again.jumps == traj.jumps && again.horizon == traj.horizon && again.x_final == traj.x_final;
}

std::vector<CrossingEvent> detect_crossings(const Trajectory& traj, double u) {
  const FlowSolver flow(traj.model);
  const CrossingScanner scanner(flow, u);
  std::vector<CrossingEvent> events;
  CrossingEvent buf[2];
  traj.for_each_segment([&](const Segment& s) {
    const int n = scanner.scan(s, buf);
    events.insert(events.end(), buf, buf + n);
    return true;
  });
  return events;
}

// ---------------------------------------------------------------------------
// Crossing balance

void CrossingBalance::add(const CrossingEvent& e) {
  switch (e.kind) {
    case CrossingKind::continuous_up:
      ++continuous;
      ++continuous_up;
      break;
    case CrossingKind::continuous_down:
      ++continuous;
      break;
    case CrossingKind::discontinuous_up:
      ++disc_up;
      break;
    case CrossingKind::discontinuous_down:
      ++disc_down;
      break;
  }
}

long long CrossingBalance::imbalance() const {
  const auto up = static_cast<long long>(disc_up);
  const auto down = static_cast<long long>(disc_down);
  const auto cont = static_cast<long long>(continuous);
  if (drift_sign < 0) return up - down - cont;
  if (drift_sign > 0) return down - up - cont;
  return 0;
}

bool CrossingBalance::holds() const { return std::llabs(imbalance()) <= 1; }

CrossingBalance crossing_balance(const Trajectory& traj, double u) {
  CrossingBalance b;
  b.level = u;
  const double m = traj.model->mu(u);
  b.drift_sign = m > 0.0 ? 1 : (m < 0.0 ? -1 : 0);
  for (const auto& e : detect_crossings(traj, u)) b.add(e);
  return b;
}

// ---------------------------------------------------------------------------
// Cycles

namespace {

void count_target(TargetCount& c, const CrossingEvent& e) {
  if (is_continuous(e.kind)) ++c.crossings;
  if (is_up(e.kind)) {
    ++c.upcrossings;
    c.up_times.push_back(e.time);
  }
}

std::vector<TargetCount> empty_counts(const std::vector<double>& targets) {
  std::vector<TargetCount> v(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) v[i].level = targets[i];
  return v;
}

}  // namespace

CycleDecomposition cycle_decompose(const Trajectory& traj, double u, const std::vector<double>& targets) {
  const FlowSolver flow(traj.model);
  const CrossingScanner base(flow, u);
  std::vector<CrossingScanner> scanners;
  for (double b : targets) scanners.emplace_back(flow, b);

  CycleDecomposition out;
  auto current = empty_counts(targets);
  std::optional<double> open_since;  // start of the running cycle
  std::vector<std::pair<std::size_t, CrossingEvent>> events;
  CrossingEvent buf[2];

  traj.for_each_segment([&](const Segment& s) {
    events.clear();
    for (std::size_t i = 0; i < scanners.size(); ++i) {
      const int n = scanners[i].scan(s, buf);
      for (int k = 0; k < n; ++k) events.emplace_back(i, buf[k]);
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const auto& a, const auto& b) { return a.second.time < b.second.time; });
    const auto boundary = base.continuous_time(s);
    std::size_t k = 0;
    if (boundary) {
      for (; k < events.size() && events[k].second.time <= *boundary; ++k)
        count_target(current[events[k].first], events[k].second);
      if (open_since) {
        out.cycles.push_back({u, out.cycles.size(), *open_since, *boundary, std::move(current)});
      } else {
        out.leading = std::move(current);
        out.leading_time = *boundary;
      }
      current = empty_counts(targets);
      open_since = *boundary;
    }
    for (; k < events.size(); ++k) count_target(current[events[k].first], events[k].second);
    return true;
  });

  if (out.cycles.empty())
    throw InsufficientData("cycle decomposition at u=" + fmt(u) + " needs at least two continuous crossings");
  out.trailing = std::move(current);
  out.trailing_time = traj.horizon - *open_since;
  return out;
}

// ---------------------------------------------------------------------------
// First passages

FirstPassages first_passages(const Trajectory& traj, double b, std::size_t n) {
  FirstPassages fp;
  if (n == 0) return fp;
  if (traj.x0 >= b) fp.times.push_back(0.0);
  const FlowSolver flow(traj.model);
  std::optional<CrossingScanner> scanner;
  const bool zero_level = traj.model->in_zero_set(b);
  if (!zero_level) scanner.emplace(flow, b);
  CrossingEvent buf[2];
  traj.for_each_segment([&](const Segment& s) {
    if (fp.times.size() >= n) return false;
    if (scanner) {
      const int k = scanner->scan(s, buf);
      for (int i = 0; i < k && fp.times.size() < n; ++i)
        if (is_up(buf[i].kind)) fp.times.push_back(buf[i].time);
    } else if (s.jump && s.x_end + *s.jump >= b && b > s.x_end) {
      fp.times.push_back(s.t1());
    }
    return fp.times.size() < n;
  });
  fp.truncated = fp.times.size() < n;
  return fp;
}

double first_passage_time(const Simulator& sim, double x0, double b, const RngConfig& rng, double time_limit) {
  if (x0 >= b) return 0.0;
  const CrossingScanner scanner(sim.flow(), b);
  std::optional<double> hit;
  CrossingEvent buf[2];
  sim.run(x0, StopRule::at_horizon(time_limit), rng, [&](const Segment& s) {
    const int k = scanner.scan(s, buf);
    for (int i = 0; i < k; ++i) {
      if (is_up(buf[i].kind)) {
        hit = buf[i].time;
        return false;
      }
    }
    return true;
  });
  if (!hit) throw SimulationError("level " + fmt(b) + " not reached before t=" + fmt(time_limit));
  return *hit;
}

double first_jump_by_inversion(const FlowSolver& flow, double x, Rng& marks) {
  return flow.invert_hazard(x, marks.exponential());
}

double first_jump_by_thinning(const FlowSolver& flow, double x, Rng& rng, double chunk) {
  const ModelSpec& s = flow.spec();
  const double cap = flow.options().t_cap;
  for (double t = 0.0; t < cap; t += chunk) {
    const double q0 = flow.flow(x, t);
    const double q1 = flow.flow(x, t + chunk);
    const double bound = s.rate.local_bound(std::min(q0, q1), std::max(q0, q1));
    if (!(bound > 0.0)) continue;
    for (double c = t + rng.exponential() / bound; c <= t + chunk; c += rng.exponential() / bound) {
      if (rng.uniform() * bound < s.lambda(flow.flow(x, c))) return c;
    }
  }
  throw HazardCeiling("thinning found no jump from x=" + fmt(x) + " before t_cap");
}

}  // namespace pdmp
