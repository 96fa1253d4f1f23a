#include <cmath>

#include "doctest.h"
#include "pdmp/errors.hpp"
#include "pdmp/model.hpp"
#include "pdmp/stats.hpp"

using namespace pdmp;

namespace {

ModelPtr shot(double c = 1, double l = 1, double a = 2) {
  return catalog("linear_shot_noise", {{"c", c}, {"lambda0", l}, {"alpha", a}});
}
ModelPtr tanh_model() { return catalog("tanh_drift", {{"lambda0", 1}, {"alpha", 2}}); }
ModelPtr updrift() { return catalog("updrift_negjumps", {{"lambda0", 2}, {"alpha", 1}}); }
ModelPtr stress() { return catalog("stress_release", {{"beta", 1}, {"alpha", 1}}); }

}  // namespace

TEST_CASE("catalog evaluators and metadata") {
  CHECK(shot()->mu(2.0) == doctest::Approx(-2.0));
  CHECK(tanh_model()->drift.at_plus_infinity.is_finite());
  CHECK(tanh_model()->drift.at_plus_infinity.value == -1.0);
  CHECK(updrift()->mean_negative(5.0) == doctest::Approx(1.0));
  CHECK(updrift()->mean_positive(5.0) == 0.0);
  CHECK(updrift()->lambda(-0.5) == 0.0);
  CHECK(updrift()->lambda(0.0) == 2.0);
  CHECK(stress()->lambda(1.0) == doctest::Approx(std::exp(1.0)));
  CHECK(shot()->drift.zeros == std::vector<double>{0.0});
}

TEST_CASE("catalog rejects unknown names and bad parameters") {
  CHECK_THROWS_AS(catalog("nope", {}), ConfigError);
  CHECK_THROWS_AS(shot(0.0), ConfigError);
  CHECK_THROWS_AS(shot(1, -1, 2), ConfigError);
  CHECK_THROWS_AS(catalog("tanh_drift", {{"lambda0", 1}}), ConfigError);
  CHECK_THROWS_AS(catalog("tanh_drift", {{"lambda0", 1}, {"alpha", 2}, {"beta", 1}}), ConfigError);
}

TEST_CASE("jump sampler means agree with m+ - m- at five probe states") {
  const std::vector<ModelPtr> models{shot(), tanh_model(), updrift(), stress()};
  for (const auto& m : models) {
    Rng rng({11, 0}, SubStream::kernel_draws);
    for (double x : {-3.0, -1.0, 0.5, 2.0, 6.0}) {
      const int n = 100000;
      std::vector<double> z(n);
      for (auto& v : z) {
        v = m->kernel->sample(x, rng);
        REQUIRE(v != 0.0);
      }
      const auto ms = stats::mean_se(z);
      const double analytic = m->mean_positive(x) - m->mean_negative(x);
      CHECK(std::abs(ms.mean - analytic) <= 4.0 * ms.se);
    }
  }
}

TEST_CASE("jump law closed forms") {
  const auto e = JumpLaw::exponential(1, 2.0);
  CHECK(e.mgf(1.0).value() == doctest::Approx(2.0));
  CHECK_FALSE(e.mgf(2.0).has_value());
  CHECK(e.mgf_domain_sup() == 2.0);
  CHECK(e.positive_excess(0.0) == doctest::Approx(0.5));
  CHECK(e.positive_excess(1.0) == doctest::Approx(0.5 * std::exp(-2.0)));
  const auto neg = JumpLaw::exponential(-1, 1.0);
  CHECK(neg.mgf(0.5).value() == doctest::Approx(1.0 / 1.5));
  CHECK(neg.cdf(-1.0) == doctest::Approx(std::exp(-1.0)));
  const auto p = JumpLaw::pareto(1.5, 1.0);
  CHECK(p.mean_positive() == doctest::Approx(3.0));
  CHECK(p.positive_excess(4.0) == doctest::Approx(std::pow(4.0, -0.5) / 0.5));
  const auto two = JumpLaw::two_sided(0.25, 1.0, 2.0);
  CHECK(two.mean() == doctest::Approx(0.25 - 0.75 / 2.0));
  CHECK(two.cdf(0.0) == doctest::Approx(0.75));
}

TEST_CASE("scenario classification of the catalog") {
  {
    const auto m = shot();
    const auto env = make_envelope(*m, 2.0);
    CHECK(env.dominance_verified);
    const auto r = classify_scenario(*m, env);
    REQUIRE(r.scenario.has_value());
    CHECK(*r.scenario == Scenario::S1);
    CHECK(r.margin == doctest::Approx(-1.5));
  }
  {
    const auto m = tanh_model();
    const auto r = classify_scenario(*m, make_envelope(*m, 2.0));
    REQUIRE(r.scenario.has_value());
    CHECK(*r.scenario == Scenario::S3);
    CHECK(r.margin == doctest::Approx(-0.5));
  }
  {
    const auto m = stress();
    const auto r = classify_scenario(*m, make_envelope(*m, 1.0));
    REQUIRE(r.scenario.has_value());
    CHECK(*r.scenario == Scenario::S2);
    CHECK(r.margin == doctest::Approx(-1.0 + std::exp(-1.0)));
  }
  {
    const auto m = updrift();
    const auto r = classify_scenario(*m, make_envelope(*m, 0.0));
    REQUIRE(r.scenario.has_value());
    CHECK(*r.scenario == Scenario::S3);
    CHECK(r.margin == doctest::Approx(-0.5));
  }
}

TEST_CASE("scenario label is stable when the probe grid is refined") {
  for (const auto& [m, u0] : std::vector<std::pair<ModelPtr, double>>{
           {shot(), 2.0}, {tanh_model(), 2.0}, {stress(), 1.0}, {updrift(), 0.0}}) {
    EnvelopeOptions coarse;
    EnvelopeOptions fine;
    fine.grid_points = 2 * coarse.grid_points - 1;
    const auto a = classify_scenario(*m, make_envelope(*m, u0, coarse));
    const auto b = classify_scenario(*m, make_envelope(*m, u0, fine));
    CHECK(a.scenario == b.scenario);
  }
}

TEST_CASE("envelope monotonicity on the probe grid") {
  const auto m = stress();
  const auto env = make_envelope(*m, 1.0);
  for (std::size_t i = 1; i < env.probe_grid.size(); ++i) {
    const double a = env.probe_grid[i - 1], b = env.probe_grid[i];
    CHECK(env.mu_bar(b) <= env.mu_bar(a));
    CHECK(env.lambda_bar(b) <= env.lambda_bar(a));
    CHECK(env.lambda_under(b) >= env.lambda_under(a));
  }
}

TEST_CASE("scenario classification fails loudly without limits") {
  ExpressionModelInput in;
  in.drift = "-tanh(x)";
  in.rate = "1";
  in.zeros = {0.0};
  in.jumps = JumpLaw::exponential(1, 2.0);
  in.drift_at_plus = Limit::finite(-1.0);
  const auto m = expression_model(in);
  CHECK_THROWS_AS(classify_scenario(*m, make_envelope(*m, 2.0)), MissingMetadata);
  in.rate_at_plus = Limit::finite(1.0);
  const auto ok = expression_model(in);
  const auto r = classify_scenario(*ok, make_envelope(*ok, 2.0));
  REQUIRE(r.scenario.has_value());
  CHECK(*r.scenario == Scenario::S3);
}

TEST_CASE("no scenario when the drift condition fails") {
  ExpressionModelInput in;
  in.drift = "1";
  in.rate = "1";
  in.jumps = JumpLaw::exponential(-1, 2.0);
  in.drift_at_plus = Limit::finite(1.0);
  in.rate_at_plus = Limit::finite(1.0);
  const auto m = expression_model(in);
  const auto r = classify_scenario(*m, make_envelope(*m, 0.0));
  CHECK_FALSE(r.scenario.has_value());
  CHECK_FALSE(r.diagnostics.empty());
}

TEST_CASE("validation rejects contract violations") {
  ExpressionModelInput in;
  in.drift = "-x";
  in.rate = "1";
  CHECK_THROWS_AS(expression_model(in), ModelValidationError);  // zero at 0 undeclared
  in.zeros = {0.0};
  CHECK_NOTHROW(expression_model(in));
  in.zeros = {0.5};
  CHECK_THROWS_AS(expression_model(in), ModelValidationError);  // not a zero
  in.zeros = {0.0};
  in.rate = "x";
  CHECK_THROWS_AS(expression_model(in), ModelValidationError);  // negative rate
  ExpressionModelInput slide;
  slide.drift = "1 - 2*step(x)";
  slide.rate = "1";
  slide.drift_discontinuities = {0.0};
  CHECK_THROWS_AS(expression_model(slide), ModelValidationError);  // orbits collide at 0
  slide.drift_discontinuities = {};
  CHECK_THROWS_AS(expression_model(slide), ModelValidationError);
  ExpressionModelInput jumpy;
  jumpy.drift = "1 + step(x - 0.3)";
  jumpy.rate = "1";
  CHECK_THROWS_AS(expression_model(jumpy), ModelValidationError);  // undeclared discontinuity
  jumpy.drift_discontinuities = {0.3};
  CHECK_NOTHROW(expression_model(jumpy));
  ExpressionModelInput syntax;
  syntax.drift = "1 +* x";
  syntax.rate = "1";
  CHECK_THROWS_AS(expression_model(syntax), ConfigError);
}

TEST_CASE("identity and linear transforms") {
  const auto m = shot();
  const auto id = transform_model(m, {"id", [](double x) { return x; }, [](double) { return 1.0; },
                                      [](double y) { return y; }});
  const auto twice = transform_model(m, {"2x", [](double x) { return 2 * x; }, [](double) { return 2.0; },
                                         [](double y) { return y / 2; }});
  for (double y : {-3.0, -0.5, 0.0, 0.7, 4.0}) {
    CHECK(id->mu(y) == m->mu(y));
    CHECK(id->lambda(y) == m->lambda(y));
    CHECK(twice->mu(y) == doctest::Approx(-y));
  }
  CHECK(twice->drift.zeros == std::vector<double>{0.0});
}

TEST_CASE("transform followed by its inverse restores the evaluators") {
  const auto m = tanh_model();
  const MonotoneMap cube{"x+x^3", [](double x) { return x + x * x * x; }, [](double x) { return 1 + 3 * x * x; },
                         [](double y) {
                           // real root of x^3 + x - y by Newton from a safe start
                           double x = std::cbrt(y);
                           for (int i = 0; i < 100; ++i) x -= (x + x * x * x - y) / (1 + 3 * x * x);
                           return x;
                         }};
  const MonotoneMap inverse{"inv", cube.inverse, [&](double y) { return 1.0 / cube.derivative(cube.inverse(y)); },
                            cube.g};
  const auto there = transform_model(m, cube);
  const auto back = transform_model(there, inverse);
  for (double x : {-4.0, -1.0, -0.1, 0.3, 2.0, 5.0}) {
    CHECK(std::abs(back->mu(x) - m->mu(x)) <= 1e-9);
    CHECK(std::abs(back->lambda(x) - m->lambda(x)) <= 1e-9);
  }
}

TEST_CASE("transform rejects an inconsistent inverse") {
  const auto m = shot();
  CHECK_THROWS_AS(transform_model(m, {"bad", [](double x) { return 2 * x; }, [](double) { return 2.0; },
                                      [](double y) { return y; }}),
                  ModelValidationError);
}

TEST_CASE("exponential transform pushes jumps forward multiplicatively") {
  const auto m = shot();
  const auto ex = transform_model(m, {"exp", [](double x) { return std::exp(x); },
                                      [](double x) { return std::exp(x); }, [](double y) { return std::log(y); }});
  const double x = 0.4;
  const double y = std::exp(x);
  const int n = 100000;
  Rng a({3, 0}, SubStream::kernel_draws);
  Rng b({3, 1}, SubStream::kernel_draws);
  std::vector<double> transformed(n), pushed(n);
  for (int i = 0; i < n; ++i) {
    transformed[i] = ex->kernel->sample(y, a);
    pushed[i] = std::exp(x) * (std::exp(m->kernel->sample(x, b)) - 1.0);
  }
  CHECK(stats::ks_two_sample(transformed, pushed).p_value > 1e-3);
}
