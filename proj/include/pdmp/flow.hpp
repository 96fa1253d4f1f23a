#pragma once

#include <optional>

#include "pdmp/model.hpp"

namespace pdmp {

struct FlowOptions {
  bool force_numeric = false;  ///< ignore closed forms even when present
  double abs_tol = 1e-12;
  double rel_tol = 1e-12;
  double t_cap = 1e6;  ///< longest inter-jump wait before HazardCeiling
};

/// Result of flowing until the next jump or a time limit.
struct Advance {
  double wait = 0.0;   ///< elapsed time
  double x_end = 0.0;  ///< state at the end of the wait (pre-jump when jumped)
  bool jumped = false;
};

/// Deterministic inter-jump dynamics q(x, t) and the integrated hazard
/// Lambda(x, t) along it. Stateless after construction, so one solver may be
/// shared by concurrent workers.
class FlowSolver {
 public:
  explicit FlowSolver(ModelPtr spec, FlowOptions options = {});

  const ModelSpec& spec() const { return *spec_; }
  const ModelPtr& model() const { return spec_; }
  const FlowOptions& options() const { return options_; }
  bool analytic() const { return analytic_; }

  /// q(x, t). Throws LeftWorkingInterval when the orbit leaves the working interval.
  double flow(double x, double t) const;

  /// Smallest t > 0 with q(x, t) = u, or nullopt when the orbit never reaches u.
  std::optional<double> hit_time(double x, double u) const;

  /// Lebesgue measure of {t <= t_max : q(x, t) in [a, b]}.
  double occupation_time(double x, double a, double b, double t_max) const;

  /// Lambda(x, t) = int_0^t lambda(q(x, s)) ds.
  double hazard(double x, double t) const;

  /// inf{t : Lambda(x, t) >= e}. Throws HazardCeiling past t_cap.
  double invert_hazard(double x, double e) const;

  /// Flows from x until the hazard reaches e or t_limit elapses, whichever is first.
  /// t_limit may be infinite, in which case HazardCeiling applies at t_cap.
  Advance advance(double x, double e, double t_limit) const;

  /// sup (or inf) of the orbit closure in the direction of motion: the nearest
  /// zero of mu ahead of x, or the edge of the working interval. x itself when mu(x) = 0.
  double orbit_limit(double x) const;

  /// Sign of the motion from x: +1, -1 or 0.
  int direction(double x) const;

 private:
  struct Walk;
  struct WalkResult;
  WalkResult walk(double x, const Walk& w) const;
  bool reachable(double x, double u) const;

  ModelPtr spec_;
  FlowOptions options_;
  bool analytic_ = false;
};

}  // namespace pdmp
