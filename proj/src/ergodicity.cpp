#include "pdmp/ergodicity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "json.hpp"
#include "pdmp/errors.hpp"

namespace pdmp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(8);
  os << v;
  return os.str();
}

double ratio00(double num, double den) {
  if (den == 0.0) return num == 0.0 ? 0.0 : kInf;
  return num / den;
}

Verdict tail_ratio_verdict(const std::vector<double>& v) {
  const double last = v.back();
  if (!(last < 1e-3)) return Verdict::fail;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) return Verdict::undeclared_limit;
  return Verdict::pass;
}

Verdict worse(Verdict a, Verdict b) {
  if (a == Verdict::fail || b == Verdict::fail) return Verdict::fail;
  if (a == Verdict::undeclared_limit || b == Verdict::undeclared_limit) return Verdict::undeclared_limit;
  return Verdict::pass;
}

ConditionCheck probe_check(const std::string& name, double eps, const std::vector<double>& xs,
                           const std::function<double(double)>& oriented) {
  ConditionCheck c;
  c.name = name;
  c.epsilon = eps;
  c.probes = xs;
  for (double x : xs) c.values.push_back(oriented(x));
  c.margin = *std::min_element(c.values.begin(), c.values.end());
  c.verdict = judge_probes(c.values);
  return c;
}

// E[g(Z)] for Z with the given law, split at 0 and at the extra points.
GeneratorValue expectation(const JumpLaw& law, const std::function<double(double)>& g,
                           const std::vector<double>& splits, double tol) {
  const Interval sup = law.support();
  std::set<double> cuts{sup.lo, sup.hi};
  for (double s : splits)
    if (s > sup.lo && s < sup.hi) cuts.insert(s);
  if (0.0 > sup.lo && 0.0 < sup.hi) cuts.insert(0.0);
  const std::vector<double> pts(cuts.begin(), cuts.end());
  auto integrand = [&](double z) {
    const double d = law.density(z);
    return d == 0.0 ? 0.0 : g(z) * d;
  };
  GeneratorValue out;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double a = pts[i], b = pts[i + 1];
    double err = 0.0, val = 0.0;
    if (std::isfinite(a) && std::isfinite(b)) {
      val = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, a, b, 20, tol, &err);
    } else if (std::isfinite(a)) {
      boost::math::quadrature::exp_sinh<double> es;
      val = es.integrate(integrand, a, kInf, tol, &err);
    } else if (std::isfinite(b)) {
      boost::math::quadrature::exp_sinh<double> es;
      val = es.integrate([&](double y) { return integrand(-y); }, -b, kInf, tol, &err);
    } else {
      throw SimulationError("jump law support is unbounded on both sides without a split point");
    }
    out.value += val;
    out.error += err;
  }
  return out;
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::undeclared_limit: return "undeclared-limit";
  }
  return "?";
}

std::vector<double> default_probes() { return {10.0, 1e2, 1e3, 1e4}; }

Verdict judge_probes(const std::vector<double>& v) {
  if (v.empty()) return Verdict::undeclared_limit;
  const double margin = *std::min_element(v.begin(), v.end());
  const double last = v.back();
  bool stabilized = v.size() == 1;
  if (v.size() >= 2) {
    const double prev = v[v.size() - 2];
    const double scale = std::max(std::abs(last), std::abs(prev));
    stabilized = scale == 0.0 || std::abs(last - prev) <= 0.1 * scale;
  }
  bool non_decreasing = true, non_increasing = true;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < v[i - 1]) non_decreasing = false;
    if (v[i] > v[i - 1]) non_increasing = false;
  }
  if (margin > 0.0 && (stabilized || non_decreasing)) return Verdict::pass;
  if (margin <= 0.0 && last <= 0.0 && (stabilized || non_increasing)) return Verdict::fail;
  return Verdict::undeclared_limit;
}

// ---------------------------------------------------------------------------
// AssumptionReport

const ConditionCheck& AssumptionReport::find(const std::string& name, double epsilon) const {
  for (const auto& c : checks)
    if (c.name == name && c.epsilon == epsilon) return c;
  throw std::out_of_range("no check " + name + " at epsilon " + fmt(epsilon));
}

Verdict AssumptionReport::combined(const std::vector<std::string>& names) const {
  std::map<double, Verdict> by_eps;
  for (const auto& c : checks) {
    if (std::find(names.begin(), names.end(), c.name) == names.end()) continue;
    auto it = by_eps.find(c.epsilon);
    by_eps[c.epsilon] = it == by_eps.end() ? c.verdict : worse(it->second, c.verdict);
  }
  if (by_eps.empty()) return Verdict::undeclared_limit;
  bool all_fail = true;
  for (const auto& [eps, v] : by_eps) {
    if (v == Verdict::pass) return Verdict::pass;
    if (v != Verdict::fail) all_fail = false;
  }
  return all_fail ? Verdict::fail : Verdict::undeclared_limit;
}

std::string AssumptionReport::to_json() const {
  nlohmann::json j;
  j["model"] = model;
  j["small_sets"] = small_sets;
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    nlohmann::json cj;
    cj["name"] = c.name;
    cj["epsilon"] = c.epsilon;
    cj["probes"] = c.probes;
    std::vector<nlohmann::json> vals;
    for (double v : c.values) vals.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(fmt(v)));
    cj["values"] = vals;
    cj["margin"] = std::isfinite(c.margin) ? nlohmann::json(c.margin) : nlohmann::json(fmt(c.margin));
    cj["verdict"] = to_string(c.verdict);
    if (!c.note.empty()) cj["note"] = c.note;
    j["checks"].push_back(cj);
  }
  return j.dump(2);
}

std::string AssumptionReport::table() const {
  std::ostringstream os;
  os << "model: " << model << "\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %-8s %-16s %-18s %s\n", "check", "eps", "verdict", "margin", "note");
  os << line;
  for (const auto& c : checks) {
    std::snprintf(line, sizeof line, "%-8s %-8g %-16s %-18.8g %s\n", c.name.c_str(), c.epsilon,
                  to_string(c.verdict).c_str(), c.margin, c.note.c_str());
    os << line;
  }
  os << "small sets: " << small_sets << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Checks

AssumptionReport check_moment_conditions(const ModelSpec& spec, const std::vector<double>& grid_in,
                                         const std::vector<double>& probes) {
  AssumptionReport r;
  r.model = spec.name;
  std::vector<double> grid = grid_in;
  if (grid.empty()) {
    const double lo = std::max(-100.0, spec.working_interval.lo);
    const double hi = std::min(100.0, spec.working_interval.hi);
    for (int i = 0; i <= 2000; ++i) grid.push_back(lo + (hi - lo) * i / 2000.0);
  }

  ConditionCheck a3;
  a3.name = "A3";
  a3.probes = grid;
  double mx = 0.0;
  for (double x : grid) {
    const auto law = spec.law_at(x);
    const double v = spec.lambda(x) * (law.mean_negative() + law.mean_positive());
    a3.values.push_back(v);
    mx = std::max(mx, v);
  }
  a3.margin = mx;
  a3.verdict = std::isfinite(mx) ? Verdict::pass : Verdict::fail;
  a3.note = "margin is the maximum of lambda (m- + m+) on the grid";
  r.checks.push_back(a3);

  ConditionCheck lower;
  lower.name = "C3-";
  ConditionCheck upper;
  upper.name = "C3+";
  for (double p : probes) {
    const auto lm = spec.law_at(-p);
    lower.probes.push_back(-p);
    lower.values.push_back(ratio00(lm.positive_excess(p), lm.mean_positive()));
    const auto lp = spec.law_at(p);
    upper.probes.push_back(p);
    upper.values.push_back(ratio00(lp.negative_excess(p), lp.mean_negative()));
  }
  for (auto* c : {&lower, &upper}) {
    c->margin = 1e-3 - c->values.back();
    c->verdict = tail_ratio_verdict(c->values);
    c->note = "tail excess over mean jump, 0/0 = 0";
    r.checks.push_back(*c);
  }
  return r;
}

AssumptionReport check_drift_conditions(const ModelSpec& spec, const std::vector<double>& epsilons,
                                        const std::vector<double>& probes) {
  AssumptionReport r;
  r.model = spec.name;
  std::vector<double> neg, pos;
  for (double p : probes) {
    neg.push_back(-p);
    pos.push_back(p);
  }
  struct Parts {
    double mu, lp, lm;
  };
  auto parts = [&](double x) {
    const auto law = spec.law_at(x);
    const double lam = spec.lambda(x);
    const double mp = law.mean_positive(), mn = law.mean_negative();
    return Parts{spec.mu(x), lam == 0.0 || mp == 0.0 ? 0.0 : lam * mp, lam == 0.0 || mn == 0.0 ? 0.0 : lam * mn};
  };
  for (double eps : epsilons) {
    r.checks.push_back(probe_check("C6", eps, neg, [&](double x) {
      const auto p = parts(x);
      return p.mu + p.lp * (1.0 - eps) - p.lm;
    }));
    r.checks.push_back(probe_check("C7", eps, pos, [&](double x) {
      const auto p = parts(x);
      return -(p.mu + p.lp - p.lm * (1.0 - eps));
    }));
    r.checks.push_back(probe_check("C62", eps, neg, [&](double x) {
      const auto p = parts(x);
      return p.mu + p.lp * (1.0 - eps) - p.lm * (1.0 + eps);
    }));
    r.checks.push_back(probe_check("C72", eps, pos, [&](double x) {
      const auto p = parts(x);
      return -(p.mu + p.lp * (1.0 + eps) - p.lm * (1.0 - eps));
    }));
  }
  auto mass = [&](double x) {
    const auto law = spec.law_at(x);
    return law.mean_negative() + law.mean_positive();
  };
  auto c8m = probe_check("C8", 0.0, neg, mass);
  const auto c8p = probe_check("C8", 0.0, pos, mass);
  c8m.probes.insert(c8m.probes.end(), c8p.probes.begin(), c8p.probes.end());
  c8m.values.insert(c8m.values.end(), c8p.values.begin(), c8p.values.end());
  c8m.margin = std::min(c8m.margin, c8p.margin);
  c8m.verdict = worse(c8m.verdict, c8p.verdict);
  c8m.note = "m- + m+ at both tails";
  r.checks.push_back(c8m);

  auto c61m = probe_check("C61-", 0.0, neg, [&](double x) {
    const auto p = parts(x);
    return p.mu + p.lp - p.lm;
  });
  auto c61p = probe_check("C61+", 0.0, pos, [&](double x) {
    const auto p = parts(x);
    return -(p.mu + p.lp - p.lm);
  });
  const auto& mu_inf = spec.drift.at_plus_infinity;
  const auto& lam_inf = spec.rate.at_plus_infinity;
  const auto xi = spec.kernel->limit_law();
  if (mu_inf.is_finite() && lam_inf.is_finite() && xi)
    c61p.note = "declared limit mu + lambda m = " + fmt(mu_inf.value + lam_inf.value * xi->mean());
  r.checks.push_back(c61m);
  r.checks.push_back(c61p);
  return r;
}

AssumptionReport audit_assumptions(const ModelSpec& spec, const std::string& small_sets_declaration) {
  AssumptionReport r = check_moment_conditions(spec);
  const AssumptionReport d = check_drift_conditions(spec);
  r.checks.insert(r.checks.end(), d.checks.begin(), d.checks.end());
  r.small_sets = small_sets_declaration;
  return r;
}

// ---------------------------------------------------------------------------
// Generator

GeneratorValue apply_generator(const ModelSpec& spec, const TestFunction& f, double x,
                               const std::vector<double>& kinks, double tol) {
  const double fx = f.f(x);
  const double drift_part = spec.mu(x) * f.df(x);
  const double lam = spec.lambda(x);
  if (lam == 0.0) return {drift_part, 0.0};
  std::vector<double> splits;
  for (double k : kinks) splits.push_back(k - x);
  const auto e = expectation(spec.law_at(x), [&](double z) { return f.f(x + z) - fx; }, splits, tol);
  if (!(e.error <= std::max(1e-8, 1e3 * tol * std::max(1.0, std::abs(e.value)))))
    throw SimulationError("kernel expectation did not converge at x = " + fmt(x) + " (error " + fmt(e.error) + ")");
  return {drift_part + lam * e.value, lam * e.error};
}

double generator_abs_decomposition(const ModelSpec& spec, double x) {
  const auto law = spec.law_at(x);
  const double lam = spec.lambda(x);
  const double sgn = x >= 0.0 ? 1.0 : -1.0;
  double v = sgn * spec.mu(x);
  if (lam == 0.0) return v;
  auto times = [&](double m) { return m == 0.0 ? 0.0 : lam * m; };
  v += sgn * times(law.mean_positive()) - sgn * times(law.mean_negative());
  if (x < 0.0) v += 2.0 * times(law.positive_excess(-x));
  else v += 2.0 * times(law.negative_excess(x));
  return v;
}

TestFunction abs_test_function() {
  return {"abs", [](double x) { return std::abs(x); }, [](double x) { return x >= 0.0 ? 1.0 : -1.0; }};
}

}  // namespace pdmp
