#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pdmp/flow.hpp"
#include "pdmp/model.hpp"
#include "pdmp/rng.hpp"

namespace pdmp {

/// One jump: epoch T_n, pre-jump state X_{T_n-} and size Z_n.
struct JumpRecord {
  double time = 0.0;
  double x_pre = 0.0;
  double size = 0.0;

  double x_post() const { return x_pre + size; }
  bool operator==(const JumpRecord&) const = default;
};

/// A flow piece [t0, t0 + duration] started at x0, optionally ended by a jump.
struct Segment {
  double t0 = 0.0;
  double x0 = 0.0;
  double duration = 0.0;
  double x_end = 0.0;          ///< state just before the end (pre-jump state if jump)
  std::optional<double> jump;  ///< jump size at t0 + duration

  double t1() const { return t0 + duration; }
};

enum class CrossingKind { continuous_up, continuous_down, discontinuous_up, discontinuous_down };

std::string to_string(CrossingKind k);
inline bool is_up(CrossingKind k) { return k == CrossingKind::continuous_up || k == CrossingKind::discontinuous_up; }
inline bool is_continuous(CrossingKind k) {
  return k == CrossingKind::continuous_up || k == CrossingKind::continuous_down;
}

struct CrossingEvent {
  double level = 0.0;
  double time = 0.0;
  CrossingKind kind = CrossingKind::continuous_up;
};

/// Finds the crossings of a single level inside a segment.
///
/// A continuous crossing needs x0 != u and u between x0 and x_end (x_end
/// inclusive). A jump from x- to x+ is an upcrossing when x+ >= u > x- and a
/// downcrossing when x- >= u > x+.
class CrossingScanner {
 public:
  /// Throws ModelValidationError when u is a zero of mu.
  CrossingScanner(const FlowSolver& flow, double u);

  double level() const { return u_; }

  /// Writes up to two time-ordered events into out and returns how many.
  int scan(const Segment& s, CrossingEvent out[2]) const;

  /// Time of the continuous crossing inside the flow part, if any.
  std::optional<double> continuous_time(const Segment& s) const;

 private:
  const FlowSolver* flow_;
  double u_;
};

struct StopRule {
  enum class Kind { horizon, n_events, n_cycles };

  Kind kind = Kind::horizon;
  double horizon = 0.0;            ///< Kind::horizon
  std::uint64_t count = 0;         ///< jumps (n_events) or complete cycles (n_cycles)
  double level = 0.0;              ///< base level for n_cycles
  double time_limit = 1e300;       ///< safety stop for every kind

  static StopRule at_horizon(double t);
  static StopRule after_events(std::uint64_t n);
  /// Stops at the (n+1)-th continuous crossing of u, so n complete cycles follow the burn-in.
  static StopRule after_cycles(std::uint64_t n, double u);

  std::string describe() const;
};

/// Observer of the streamed path; returning false stops the run.
using SegmentObserver = std::function<bool(const Segment&)>;

struct RunSummary {
  double end_time = 0.0;
  double x_final = 0.0;
  std::uint64_t jumps = 0;
  std::uint64_t base_crossings = 0;  ///< continuous crossings of the n_cycles level
  bool stopped_by_observer = false;
};

/// Ordered event log of one simulated path.
struct Trajectory {
  ModelPtr model;
  double x0 = 0.0;
  std::vector<JumpRecord> jumps;
  double horizon = 0.0;  ///< end of the observed window
  double x_final = 0.0;  ///< state at the horizon
  RngConfig rng;
  StopRule stop;

  /// Replays the stored path as segments (no random draws involved).
  void for_each_segment(const std::function<bool(const Segment&)>& fn) const;

  /// Re-checks T_1 < T_2 < ... <= horizon, Z_n != 0 and
  /// X_{T_n-} = q(X_{T_{n-1}}, T_n - T_{n-1}) within tol. Returns a message per violation.
  std::vector<std::string> verify(const FlowSolver& flow, double tol = 1e-9) const;
};

/// Exact PDMP simulator: waits by hazard inversion with Exp(1) marks, jump
/// sizes from the kernel at the pre-jump state, each on its own sub-stream.
class Simulator {
 public:
  explicit Simulator(ModelPtr spec, FlowOptions options = {});

  const FlowSolver& flow() const { return flow_; }
  const ModelSpec& spec() const { return flow_.spec(); }

  /// Streams the path to the observer. Throws HazardCeiling or LeftWorkingInterval.
  RunSummary run(double x0, const StopRule& stop, const RngConfig& rng, const SegmentObserver& observer) const;

  /// Stores the whole path.
  Trajectory simulate(double x0, const StopRule& stop, const RngConfig& rng) const;

 private:
  FlowSolver flow_;
};

/// Same configuration, same path: re-simulates and compares jump records exactly.
bool replay_matches(const Trajectory& traj, FlowOptions options = {});

/// All crossings of u, time-sorted. Throws ModelValidationError when u is a zero of mu.
std::vector<CrossingEvent> detect_crossings(const Trajectory& traj, double u);

/// Counts of one crossing level, with the pathwise balance check between
/// discontinuous crossings and continuous crossings.
struct CrossingBalance {
  double level = 0.0;
  int drift_sign = 0;  ///< sign of mu at the level
  std::uint64_t continuous = 0;
  std::uint64_t continuous_up = 0;
  std::uint64_t disc_up = 0;
  std::uint64_t disc_down = 0;

  void add(const CrossingEvent& e);
  /// N+d - N-d - N for mu(u) < 0, mirrored for mu(u) > 0.
  long long imbalance() const;
  bool holds() const;
};

CrossingBalance crossing_balance(const Trajectory& traj, double u);

/// Upcrossings of a target level inside one cycle.
struct TargetCount {
  double level = 0.0;
  std::uint32_t crossings = 0;    ///< N^b: continuous crossings of b
  std::uint32_t upcrossings = 0;  ///< N^b_+: continuous and discontinuous upcrossings
  std::vector<double> up_times;
};

struct CycleRecord {
  double base = 0.0;
  std::size_t index = 0;
  double start = 0.0;  ///< tau_{n-1}(u)
  double end = 0.0;    ///< tau_n(u)
  std::vector<TargetCount> targets;

  double length() const { return end - start; }
};

struct CycleDecomposition {
  std::vector<CycleRecord> cycles;
  std::vector<TargetCount> leading;   ///< before the first point of N^u
  std::vector<TargetCount> trailing;  ///< after the last point of N^u
  double leading_time = 0.0;
  double trailing_time = 0.0;
};

/// Splits the path at successive continuous crossings of u. Throws
/// InsufficientData with fewer than two such crossings.
CycleDecomposition cycle_decompose(const Trajectory& traj, double u, const std::vector<double>& targets);

struct FirstPassages {
  std::vector<double> times;
  bool truncated = false;
};

/// T_1(b) = inf{t > 0 : X_t >= b}; T_{k+1}(b) the next time the path is at or
/// above b after having been below it.
FirstPassages first_passages(const Trajectory& traj, double b, std::size_t n);

/// Streams a fresh path from x0 until it first reaches b. Returns T(b).
double first_passage_time(const Simulator& sim, double x0, double b, const RngConfig& rng,
                          double time_limit = 1e300);

/// First jump time from x by hazard inversion.
double first_jump_by_inversion(const FlowSolver& flow, double x, Rng& marks);

/// First jump time from x by thinning against RateFn::local_bound over time
/// chunks of the given length (Ogata-style adaptive bound).
double first_jump_by_thinning(const FlowSolver& flow, double x, Rng& rng, double chunk = 0.5);

}  // namespace pdmp
