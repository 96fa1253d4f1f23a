#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pdmp/rng.hpp"

namespace pdmp {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return x >= lo && x <= hi; }
  double length() const { return hi - lo; }
};

/// Declared behaviour of a characteristic as its argument tends to ±∞.
struct Limit {
  enum class Kind { undeclared, finite, plus_infinity, minus_infinity };

  Kind kind = Kind::undeclared;
  double value = 0.0;

  static Limit finite(double v) { return {Kind::finite, v}; }
  static Limit plus_infinity() { return {Kind::plus_infinity, 0.0}; }
  static Limit minus_infinity() { return {Kind::minus_infinity, 0.0}; }
  /// Builds from a double, mapping ±inf to the infinite kinds.
  static Limit from_double(double v);

  bool declared() const { return kind != Kind::undeclared; }
  bool is_finite() const { return kind == Kind::finite; }
  /// ±inf for infinite limits. Throws MissingMetadata when undeclared.
  double value_or_throw(const std::string& what) const;
};

enum class SignSupport { positive, negative, mixed };

/// Distribution of a single jump size. All closed forms are exact.
class JumpLaw {
 public:
  enum class Family { exponential, pareto, two_sided_exponential };

  /// Z = sign * (shift + E / rate), E ~ Exp(1), shift >= 0.
  static JumpLaw exponential(int sign, double rate, double shift = 0.0);
  /// P(Z > z) = (scale / z)^shape for z >= scale.
  static JumpLaw pareto(double shape, double scale);
  /// +Exp(rate_up) with probability p_up, otherwise -Exp(rate_down).
  static JumpLaw two_sided(double p_up, double rate_up, double rate_down);

  Family family() const { return family_; }
  double sample(Rng& rng) const;

  double mean_positive() const;  ///< m+ = E[Z; Z > 0]
  double mean_negative() const;  ///< m- = -E[Z; Z < 0]
  double mean() const { return mean_positive() - mean_negative(); }

  double cdf(double z) const;
  double density(double z) const;

  /// E exp(wZ) where finite.
  std::optional<double> mgf(double w) const;
  /// sup{w >= 0 : E exp(wZ) < inf}; +inf when the MGF exists for all w >= 0.
  double mgf_domain_sup() const;

  /// E[(Z - a)^+] for a >= 0.
  double positive_excess(double a) const;
  /// E[(-Z - a)^+] for a >= 0.
  double negative_excess(double a) const;

  SignSupport sign() const;
  Interval support() const;
  std::string describe() const;

 private:
  Family family_ = Family::exponential;
  int sign_ = 1;
  double rate_ = 1.0;
  double shift_ = 0.0;
  double shape_ = 0.0;
  double scale_ = 0.0;
  double p_up_ = 0.0;
  double rate_down_ = 0.0;
};

/// Jump kernel J(x, dz). Samplers never return 0.
class JumpKernel {
 public:
  virtual ~JumpKernel() = default;

  virtual double sample(double x, Rng& rng) const = 0;
  /// Analytic law of the jump from x, when known.
  virtual std::optional<JumpLaw> law_at(double x) const = 0;
  /// Weak limit of J(y, .) as y -> +inf, when declared.
  virtual std::optional<JumpLaw> limit_law() const = 0;
  virtual SignSupport sign_support(double x) const = 0;
};

/// State-independent kernel.
class HomogeneousKernel final : public JumpKernel {
 public:
  explicit HomogeneousKernel(JumpLaw law) : law_(law) {}

  double sample(double, Rng& rng) const override { return law_.sample(rng); }
  std::optional<JumpLaw> law_at(double) const override { return law_; }
  std::optional<JumpLaw> limit_law() const override { return law_; }
  SignSupport sign_support(double) const override { return law_.sign(); }

  const JumpLaw& law() const { return law_; }

 private:
  JumpLaw law_;
};

/// Kernel known only through a sampler (e.g. after a change of variables).
class SampledKernel final : public JumpKernel {
 public:
  using Sampler = std::function<double(double, Rng&)>;
  using SignFn = std::function<SignSupport(double)>;

  SampledKernel(Sampler sampler, SignFn sign) : sampler_(std::move(sampler)), sign_(std::move(sign)) {}

  double sample(double x, Rng& rng) const override { return sampler_(x, rng); }
  std::optional<JumpLaw> law_at(double) const override { return std::nullopt; }
  std::optional<JumpLaw> limit_law() const override { return std::nullopt; }
  SignSupport sign_support(double x) const override { return sign_(x); }

 private:
  Sampler sampler_;
  SignFn sign_;
};

/// Drift coefficient mu with its zero set D_mu and declared limits.
struct DriftFn {
  std::function<double(double)> eval;
  std::vector<double> zeros;            ///< sorted, inside the working interval
  std::vector<double> discontinuities;  ///< points where mu jumps (right-continuous)
  Limit at_plus_infinity;
  Limit at_minus_infinity;

  double operator()(double x) const { return eval(x); }
};

/// Jump intensity lambda >= 0 with declared limits and a local upper bound.
struct RateFn {
  std::function<double(double)> eval;
  /// Upper bound of lambda on [lo, hi]. When empty a probe-grid bound is used.
  std::function<double(double, double)> bound;
  std::vector<double> discontinuities;
  Limit at_plus_infinity;
  Limit at_minus_infinity;

  double operator()(double x) const { return eval(x); }
  double local_bound(double lo, double hi) const;
};

/// Closed-form flow and hazard, supplied by catalog models.
struct ClosedForms {
  std::function<double(double, double)> flow;                      ///< q(x, t)
  std::function<std::optional<double>(double, double)> hit_time;   ///< (x, u)
  std::function<double(double, double)> hazard;                    ///< Lambda(x, t)
  std::function<std::optional<double>(double, double)> invert_hazard;  ///< (x, e)

  bool complete() const { return flow && hit_time && hazard && invert_hazard; }
};

enum class Scenario { S1, S2, S3 };
std::string to_string(Scenario s);

/// The model triple (mu, lambda, J) plus metadata. Immutable after construction.
struct ModelSpec {
  std::string name;
  std::map<std::string, double> params;
  std::map<std::string, std::string> sources;  ///< expression sources, if any

  DriftFn drift;
  RateFn rate;
  std::shared_ptr<const JumpKernel> kernel;
  Interval working_interval{-1e6, 1e6};
  std::optional<Scenario> scenario_hint;
  double default_u0 = 0.0;
  double zero_tolerance = 1e-12;
  ClosedForms closed;

  double mu(double x) const { return drift(x); }
  double lambda(double x) const { return rate(x); }

  /// Analytic jump law at x. Throws MissingMetadata when the kernel has none.
  JumpLaw law_at(double x) const;
  double mean_positive(double x) const { return law_at(x).mean_positive(); }
  double mean_negative(double x) const { return law_at(x).mean_negative(); }

  /// True when x is within zero_tolerance of a declared zero of mu.
  bool in_zero_set(double x) const;
};

using ModelPtr = std::shared_ptr<const ModelSpec>;

/// Closed-form catalog: linear_shot_noise(c, lambda0, alpha), tanh_drift(lambda0, alpha),
/// updrift_negjumps(lambda0, alpha), stress_release(beta, alpha).
/// Throws ConfigError on unknown names, missing or non-positive parameters.
ModelPtr catalog(const std::string& name, const std::map<std::string, double>& params);
std::vector<std::string> catalog_names();

/// Model declared by expression strings plus a named jump family.
struct ExpressionModelInput {
  std::string name = "expression";
  std::string drift;
  std::string rate;
  std::map<std::string, double> params;
  JumpLaw jumps = JumpLaw::exponential(1, 1.0);
  std::vector<double> zeros;
  std::vector<double> drift_discontinuities;
  std::vector<double> rate_discontinuities;
  Interval working_interval{-1e6, 1e6};
  Limit drift_at_plus, drift_at_minus, rate_at_plus, rate_at_minus;
  double default_u0 = 0.0;
  double zero_tolerance = 1e-12;
};
ModelPtr expression_model(const ExpressionModelInput& input);

/// Same model without its closed forms, forcing the numeric flow path.
ModelPtr strip_closed_forms(const ModelPtr& spec);

/// Checks the model contract; throws ModelValidationError describing the first violation.
void validate(const ModelSpec& spec);

/// Strictly increasing C1 change of variables y = g(x).
struct MonotoneMap {
  std::string name;
  std::function<double(double)> g;
  std::function<double(double)> derivative;
  std::function<double(double)> inverse;
};

/// Model of g(X_t): mu^g(y) = g'(g^-1(y)) mu(g^-1(y)), lambda^g(y) = lambda(g^-1(y)),
/// jumps z -> g(g^-1(y) + z) - y. Throws ModelValidationError on an inconsistent inverse.
ModelPtr transform_model(const ModelPtr& spec, const MonotoneMap& map);

/// Upper/lower envelopes of the model above u0.
struct DominationEnvelope {
  double u0 = 0.0;
  std::vector<double> probe_grid;  ///< points >= u0 used for sup / inf
  std::function<double(double)> mu_bar;        ///< sup_{x>=u} mu(x)
  std::function<double(double)> lambda_bar;    ///< sup_{x>=u} lambda(x)
  std::function<double(double)> lambda_under;  ///< inf_{x>=u} lambda(x)
  JumpLaw xi_bar;                              ///< dominates J(x, .) for x >= u0
  std::optional<JumpLaw> xi_under;             ///< dominated by J(x, .) for x >= u0
  bool dominance_verified = false;
  std::vector<std::string> notes;
};

struct EnvelopeOptions {
  std::size_t grid_points = 201;
  double span = 50.0;  ///< probe [u0, u0 + span] intersected with the working interval
  std::size_t dominance_samples = 10000;
  double dominance_significance = 1e-3;
  std::uint64_t seed = 0x5eed;
};

DominationEnvelope make_envelope(const ModelSpec& spec, double u0, const EnvelopeOptions& options = {});

struct ScenarioReport {
  std::optional<Scenario> scenario;
  double margin = 0.0;  ///< left-hand side of the negative-drift condition of the scenario
  double u0 = 0.0;
  std::vector<std::string> diagnostics;
};

/// Determines which of the three high-level scenarios the model satisfies.
/// Throws MissingMetadata when the only candidate scenario needs undeclared limits.
ScenarioReport classify_scenario(const ModelSpec& spec, const DominationEnvelope& envelope);

}  // namespace pdmp
