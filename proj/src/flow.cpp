#include "pdmp/flow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <boost/math/tools/toms748_solve.hpp>
#include <boost/numeric/odeint.hpp>

#include "pdmp/errors.hpp"

namespace pdmp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
namespace odeint = boost::numeric::odeint;
using State = std::array<double, 2>;  // (q, Lambda)
using Dopri = odeint::runge_kutta_dopri5<State>;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

struct FlowSolver::Walk {
  double t_target = kInf;
  std::optional<double> level;
  double hazard_target = kInf;
};

struct FlowSolver::WalkResult {
  enum class Stop { time, level, hazard };
  Stop stop = Stop::time;
  double t = 0.0;
  double q = 0.0;
  double hazard = 0.0;
};

FlowSolver::FlowSolver(ModelPtr spec, FlowOptions options)
    : spec_(std::move(spec)), options_(options) {
  if (!spec_) throw std::invalid_argument("FlowSolver needs a model");
  analytic_ = !options_.force_numeric && spec_->closed.complete();
}

int FlowSolver::direction(double x) const {
  if (spec_->in_zero_set(x)) return 0;
  const double m = spec_->mu(x);
  return m > 0.0 ? 1 : (m < 0.0 ? -1 : 0);
}

double FlowSolver::orbit_limit(double x) const {
  const int dir = direction(x);
  const auto& zeros = spec_->drift.zeros;
  if (dir > 0) {
    auto it = std::upper_bound(zeros.begin(), zeros.end(), x);
    return it == zeros.end() ? spec_->working_interval.hi : *it;
  }
  if (dir < 0) {
    auto it = std::lower_bound(zeros.begin(), zeros.end(), x);
    return it == zeros.begin() ? spec_->working_interval.lo : *(it - 1);
  }
  return x;
}

bool FlowSolver::reachable(double x, double u) const {
  const int dir = direction(x);
  if (dir == 0 || u == x || (u - x) * dir < 0.0) return false;
  const double lim = orbit_limit(x);
  const bool attracting = spec_->in_zero_set(lim);
  return attracting ? (lim - u) * dir > 0.0 : (lim - u) * dir >= 0.0;
}

FlowSolver::WalkResult FlowSolver::walk(double x, const Walk& w) const {
  using Stop = WalkResult::Stop;
  const ModelSpec& s = *spec_;
  const int dir = direction(x);

  if (dir == 0) {
    const double lam = s.lambda(x);
    if (std::isfinite(w.hazard_target) && lam > 0.0 && w.hazard_target / lam <= w.t_target)
      return {Stop::hazard, w.hazard_target / lam, x, w.hazard_target};
    if (!std::isfinite(w.t_target)) throw std::logic_error("flow walk without a finite time target");
    return {Stop::time, w.t_target, x, lam * w.t_target};
  }

  const double limit = orbit_limit(x);
  const bool limit_attracting = s.in_zero_set(limit);

  // Breakpoints strictly ahead of x and strictly before the limit, in order of passage.
  std::vector<double> breaks;
  auto collect = [&](const std::vector<double>& points) {
    for (double p : points) {
      if ((p - x) * dir > 0.0 && (limit - p) * dir > 0.0) breaks.push_back(p);
    }
  };
  collect(s.drift.discontinuities);
  collect(s.rate.discontinuities);
  std::sort(breaks.begin(), breaks.end(), [dir](double a, double b) { return a * dir < b * dir; });
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  breaks.push_back(limit);

  auto rhs = [&s](const State& y, State& dy, double) {
    dy[0] = s.mu(y[0]);
    dy[1] = s.lambda(y[0]);
  };
  auto redo = [&](State y, double ta, double tb) {
    if (tb > ta) {
      auto controlled = odeint::make_controlled(options_.abs_tol, options_.rel_tol, Dopri());
      odeint::integrate_adaptive(controlled, rhs, y, ta, tb, std::min(1e-3, tb - ta));
    }
    return y;
  };

  double t = 0.0;
  State y{x, 0.0};
  for (std::size_t piece = 0; piece < breaks.size(); ++piece) {
    const double p = breaks[piece];
    const bool final_piece = piece + 1 == breaks.size();
    const bool piece_end_reachable = !(final_piece && limit_attracting);

    auto stepper = odeint::make_dense_output(options_.abs_tol, options_.rel_tol, Dopri());
    const double speed = std::max(std::fabs(s.mu(y[0])), 1e-300);
    stepper.initialize(y, t, std::clamp(1e-3 / speed, 1e-9, 1e-2));

    for (;;) {
      const auto [ta, tb] = stepper.do_step(rhs);
      const State ya = stepper.previous_state();
      const State yb = stepper.current_state();

      auto root = [&](int comp, double target) {
        auto f = [&](double tt) {
          State st;
          stepper.calc_state(tt, st);
          return st[comp] - target;
        };
        const double fa = ya[comp] - target;
        const double fb = yb[comp] - target;
        if (fa == 0.0) return ta;
        if (fb == 0.0 || (fa > 0.0) == (fb > 0.0)) return tb;
        boost::uintmax_t iters = 200;
        const auto tol = [](double a, double b) {
          return std::fabs(b - a) <= 1e-15 * std::max(1.0, std::fabs(a));
        };
        const auto r = boost::math::tools::toms748_solve(f, ta, tb, fa, fb, tol, iters);
        return 0.5 * (r.first + r.second);
      };

      // Earliest event in this step; ties favour level, then hazard, then time, then breakpoint.
      enum class Ev { none, level, hazard, time, piece };
      Ev ev = Ev::none;
      double te = kInf;
      auto consider = [&](Ev kind, double when) {
        if (when < te) {
          te = when;
          ev = kind;
        }
      };
      if (w.level && (yb[0] - *w.level) * dir >= 0.0) consider(Ev::level, root(0, *w.level));
      if (yb[1] >= w.hazard_target) consider(Ev::hazard, root(1, w.hazard_target));
      if (tb >= w.t_target) consider(Ev::time, w.t_target);
      if (piece_end_reachable && (yb[0] - p) * dir >= 0.0) consider(Ev::piece, root(0, p));
      if (ev == Ev::none && limit_attracting && final_piece && (yb[0] - limit) * dir > 0.0) {
        // Numerical overshoot of an attracting zero: the orbit rests there from now on.
        const double lam = s.lambda(limit);
        if (w.level) throw SimulationError("flow overshot the attracting zero " + fmt(limit));
        if (std::isfinite(w.hazard_target) && lam > 0.0) {
          const double th = ta + (w.hazard_target - ya[1]) / lam;
          if (th <= w.t_target) return {Stop::hazard, th, limit, w.hazard_target};
        }
        if (!std::isfinite(w.t_target)) throw std::logic_error("flow walk without a finite time target");
        return {Stop::time, w.t_target, limit, ya[1] + lam * (w.t_target - ta)};
      }
      if (ev == Ev::none) continue;

      te = std::clamp(te, ta, tb);
      State ye = redo(ya, ta, te);
      if (limit_attracting && (ye[0] - limit) * dir > 0.0) ye[0] = limit;
      switch (ev) {
        case Ev::level:
          return {Stop::level, te, *w.level, ye[1]};
        case Ev::hazard:
          return {Stop::hazard, te, ye[0], w.hazard_target};
        case Ev::time:
          return {Stop::time, te, ye[0], ye[1]};
        case Ev::piece:
          if (final_piece) {
            throw LeftWorkingInterval("orbit from x=" + fmt(x) + " leaves the working interval [" +
                                      fmt(s.working_interval.lo) + ", " + fmt(s.working_interval.hi) +
                                      "] at t=" + fmt(te));
          }
          // One Newton correction so the restart happens exactly at the breakpoint.
          if (ye[0] != p) {
            const double m = s.mu(ye[0]);
            if (m != 0.0) te += (p - ye[0]) / m;
          }
          t = te;
          y = {p, ye[1]};
          break;
        case Ev::none:
          break;
      }
      break;
    }
  }
  throw std::logic_error("flow walk ran past its final piece");
}

double FlowSolver::flow(double x, double t) const {
  if (!(t >= 0.0)) throw std::invalid_argument("flow time must be non-negative, got " + fmt(t));
  if (t == 0.0) return x;
  if (analytic_) {
    const double q = spec_->closed.flow(x, t);
    if (!spec_->working_interval.contains(q))
      throw LeftWorkingInterval("orbit from x=" + fmt(x) + " leaves the working interval by t=" + fmt(t));
    return q;
  }
  return walk(x, {t, std::nullopt, kInf}).q;
}

std::optional<double> FlowSolver::hit_time(double x, double u) const {
  if (!reachable(x, u)) return std::nullopt;
  if (analytic_) return spec_->closed.hit_time(x, u);
  const auto r = walk(x, {options_.t_cap, u, kInf});
  if (r.stop != WalkResult::Stop::level) return std::nullopt;
  return r.t;
}

double FlowSolver::occupation_time(double x, double a, double b, double t_max) const {
  if (!(a < b)) throw std::invalid_argument("occupation band needs a < b");
  if (!(t_max >= 0.0)) throw std::invalid_argument("occupation time horizon must be non-negative");
  if (t_max == 0.0) return 0.0;
  const int dir = direction(x);
  if (dir == 0) return (x >= a && x <= b) ? t_max : 0.0;
  // The orbit is monotone, so its visit to [a, b] is a single time interval.
  const double near = dir > 0 ? a : b;
  const double far = dir > 0 ? b : a;
  if ((x - far) * dir > 0.0) return 0.0;
  double t_in = 0.0;
  if ((near - x) * dir > 0.0) {
    const auto h = hit_time(x, near);
    if (!h) return 0.0;
    t_in = *h;
  }
  double t_out = 0.0;
  if (x != far) {
    const auto h = hit_time(x, far);
    t_out = h ? *h : kInf;
  }
  return std::max(0.0, std::min(t_out, t_max) - std::min(t_in, t_max));
}

double FlowSolver::hazard(double x, double t) const {
  if (!(t >= 0.0)) throw std::invalid_argument("hazard time must be non-negative");
  if (t == 0.0) return 0.0;
  if (analytic_) return spec_->closed.hazard(x, t);
  return walk(x, {t, std::nullopt, kInf}).hazard;
}

double FlowSolver::invert_hazard(double x, double e) const {
  if (!(e > 0.0)) throw std::invalid_argument("hazard target must be positive, got " + fmt(e));
  if (analytic_) {
    const auto t = spec_->closed.invert_hazard(x, e);
    if (!t || *t > options_.t_cap)
      throw HazardCeiling("integrated hazard from x=" + fmt(x) + " stays below " + fmt(e) + " up to t_cap=" +
                          fmt(options_.t_cap));
    return *t;
  }
  const auto r = walk(x, {options_.t_cap, std::nullopt, e});
  if (r.stop != WalkResult::Stop::hazard)
    throw HazardCeiling("integrated hazard from x=" + fmt(x) + " reaches only " + fmt(r.hazard) + " < " + fmt(e) +
                        " at t_cap=" + fmt(options_.t_cap));
  return r.t;
}

Advance FlowSolver::advance(double x, double e, double t_limit) const {
  if (!(e > 0.0)) throw std::invalid_argument("hazard target must be positive");
  const double cap = options_.t_cap;
  if (analytic_) {
    const auto tau = spec_->closed.invert_hazard(x, e);
    if (tau && *tau <= t_limit && *tau <= cap) return {*tau, flow(x, *tau), true};
    if (t_limit <= cap) return {t_limit, flow(x, t_limit), false};
    throw HazardCeiling("integrated hazard from x=" + fmt(x) + " stays below " + fmt(e) + " up to t_cap=" +
                        fmt(cap));
  }
  const auto r = walk(x, {std::min(t_limit, cap), std::nullopt, e});
  if (r.stop == WalkResult::Stop::hazard) return {r.t, r.q, true};
  if (t_limit <= cap) return {t_limit, r.q, false};
  throw HazardCeiling("integrated hazard from x=" + fmt(x) + " reaches only " + fmt(r.hazard) + " < " + fmt(e) +
                      " at t_cap=" + fmt(cap));
}

}  // namespace pdmp
