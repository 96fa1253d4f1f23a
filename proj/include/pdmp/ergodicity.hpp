#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pdmp/estimate.hpp"
#include "pdmp/model.hpp"

namespace pdmp {

enum class Verdict { pass, fail, undeclared_limit };
std::string to_string(Verdict v);

/// One audited condition. The verdict is a function of the recorded values.
struct ConditionCheck {
  std::string name;
  double epsilon = 0.0;         ///< 0 when the condition has no epsilon
  std::vector<double> probes;   ///< x values, ordered towards the limit
  std::vector<double> values;   ///< expression at each probe
  double margin = 0.0;          ///< oriented so that margin > 0 means satisfied
  Verdict verdict = Verdict::undeclared_limit;
  std::string note;
};

struct AssumptionReport {
  std::string model;
  std::vector<ConditionCheck> checks;
  std::string small_sets = "not declared";  ///< user declaration, recorded verbatim

  const ConditionCheck& find(const std::string& name, double epsilon = 0.0) const;
  /// Overall verdict of a named group: pass if every check of one epsilon passes.
  Verdict combined(const std::vector<std::string>& names) const;

  std::string to_json() const;
  std::string table() const;
};

/// Default probe magnitudes 10, 1e2, 1e3, 1e4.
std::vector<double> default_probes();

/// Local boundedness of lambda (m- + m+) on the grid and the vanishing tail
/// ratios at -inf and +inf (0/0 = 0). Verdicts of the tail ratios: pass when
/// non-increasing with last value < 1e-3, fail when the last value is >= 1e-3,
/// undeclared_limit otherwise. Throws MissingMetadata without an analytic law.
AssumptionReport check_moment_conditions(const ModelSpec& spec, const std::vector<double>& grid = {},
                                         const std::vector<double>& probes = default_probes());

/// Drift conditions with and without the epsilon margins, the positivity of
/// m- + m+ at infinity and the combined mu + lambda m limits.
AssumptionReport check_drift_conditions(const ModelSpec& spec, const std::vector<double>& epsilons = {0.1, 0.01},
                                        const std::vector<double>& probes = default_probes());

/// Both reports merged, with the small-set declaration.
AssumptionReport audit_assumptions(const ModelSpec& spec, const std::string& small_sets_declaration = "not declared");

/// Verdict rule used for every probe sequence; values oriented so that
/// positive is good and ordered towards the limit.
Verdict judge_probes(const std::vector<double>& oriented_values);

struct GeneratorValue {
  double value = 0.0;
  double error = 0.0;
};

/// mu(x) f'(x) + lambda(x) E[f(x + Z) - f(x)], Z ~ J(x, .), the expectation by
/// adaptive quadrature on the analytic law. kinks lists points where f is not
/// smooth. Throws SimulationError when the quadrature error exceeds tol.
GeneratorValue apply_generator(const ModelSpec& spec, const TestFunction& f, double x,
                               const std::vector<double>& kinks = {}, double tol = 1e-10);

/// The same generator for f = |x| written through m+, m- and the two boundary
/// excess integrals.
double generator_abs_decomposition(const ModelSpec& spec, double x);

TestFunction abs_test_function();

}  // namespace pdmp
