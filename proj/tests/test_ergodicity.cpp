#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doctest.h"
#include "json.hpp"
#include "pdmp/ergodicity.hpp"
#include "pdmp/errors.hpp"

using namespace pdmp;

namespace {

ModelPtr with_jumps(const std::string& drift, const std::string& rate, JumpLaw jumps, std::vector<double> zeros = {}) {
  ExpressionModelInput in;
  in.drift = drift;
  in.rate = rate;
  in.jumps = jumps;
  in.zeros = std::move(zeros);
  return expression_model(in);
}

std::vector<ModelPtr> models() {
  return {catalog("linear_shot_noise", {{"c", 1}, {"lambda0", 1}, {"alpha", 2}}),
          catalog("tanh_drift", {{"lambda0", 1}, {"alpha", 2}}),
          catalog("updrift_negjumps", {{"lambda0", 2}, {"alpha", 1}}),
          catalog("stress_release", {{"beta", 1}, {"alpha", 1}}),
          with_jumps("-x", "1", JumpLaw::pareto(1.5, 1.0), {0.0}),
          with_jumps("-x", "1", JumpLaw::two_sided(0.4, 1.0, 3.0), {0.0})};
}

}  // namespace

TEST_CASE("probe verdict rule") {
  CHECK(judge_probes({9.5, 99.5, 999.5, 9999.5}) == Verdict::pass);
  CHECK(judge_probes({0.5, 0.5, 0.5, 0.5}) == Verdict::pass);
  CHECK(judge_probes({-0.5, -0.5, -0.5, -0.5}) == Verdict::fail);
  CHECK(judge_probes({-1.0, -10.0, -100.0, -1000.0}) == Verdict::fail);
  CHECK(judge_probes({10.0, 5.0, 2.0, 1.0}) == Verdict::undeclared_limit);
  CHECK(judge_probes({-1.0, 1.0, 3.0, 9.0}) == Verdict::undeclared_limit);
}

TEST_CASE("moment conditions for linear shot noise") {
  const auto r = check_moment_conditions(*models()[0]);
  CHECK(r.find("A3").verdict == Verdict::pass);
  CHECK(r.find("A3").margin == doctest::Approx(0.5));
  CHECK(r.find("C3-").verdict == Verdict::pass);
  CHECK(r.find("C3+").verdict == Verdict::pass);
}

TEST_CASE("tail ratio against quadrature") {
  const double alpha = 0.5;
  const auto m = with_jumps("-x", "1", JumpLaw::exponential(1, alpha), {0.0});
  const auto r = check_moment_conditions(*m);
  const auto& c = r.find("C3-");
  for (std::size_t i = 0; i < c.probes.size(); ++i) {
    const double a = -c.probes[i];
    auto g = [&](double z) { return (z - a) * alpha * std::exp(-alpha * z); };
    const double q = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, a, a + 200.0 / alpha, 15, 1e-13);
    CHECK(c.values[i] == doctest::Approx(q / (1.0 / alpha)).epsilon(1e-9));
  }
  CHECK(c.verdict == Verdict::pass);
}

TEST_CASE("heavy-tailed jumps fail the tail ratio condition") {
  const auto r = check_moment_conditions(*models()[4]);
  const auto& c = r.find("C3-");
  CHECK(c.verdict == Verdict::fail);
  CHECK(c.values.back() == doctest::Approx((2.0 / 3.0) / std::sqrt(1e4)));
  CHECK(r.find("A3").verdict == Verdict::pass);
}

TEST_CASE("drift conditions") {
  const auto shot = check_drift_conditions(*models()[0]);
  CHECK(shot.find("C7", 0.1).values[0] == doctest::Approx(9.5));
  CHECK(shot.find("C7", 0.1).verdict == Verdict::pass);
  CHECK(shot.find("C6", 0.1).verdict == Verdict::pass);
  CHECK(shot.combined({"C6", "C7"}) == Verdict::pass);

  const auto up = check_drift_conditions(*models()[2]);
  CHECK(up.find("C61+").values.back() == doctest::Approx(1.0));
  CHECK(up.find("C61+").verdict == Verdict::pass);
  CHECK(up.find("C61+").note.find("-1") != std::string::npos);

  const auto bad = check_drift_conditions(*with_jumps("1", "1", JumpLaw::exponential(-1, 2.0)));
  CHECK(bad.find("C7", 0.1).verdict == Verdict::fail);
  CHECK(bad.find("C61+").values[0] == doctest::Approx(-0.5));
  CHECK(bad.combined({"C6", "C7"}) == Verdict::fail);

  const auto tanh_r = check_drift_conditions(*models()[1]);
  CHECK(tanh_r.find("C7", 0.01).verdict == Verdict::pass);
  CHECK(tanh_r.find("C8").verdict == Verdict::pass);
}

TEST_CASE("smaller epsilon never turns a pass into a non-pass") {
  for (const auto& m : models()) {
    const auto r = check_drift_conditions(*m, {0.1, 0.01});
    for (const char* name : {"C6", "C7", "C62", "C72"}) {
      if (r.find(name, 0.1).verdict == Verdict::pass) CHECK_MESSAGE(r.find(name, 0.01).verdict == Verdict::pass, m->name, " ", name);
      for (std::size_t i = 0; i < r.find(name, 0.1).values.size(); ++i)
        CHECK(r.find(name, 0.01).values[i] >= r.find(name, 0.1).values[i] - 1e-12);
    }
  }
}

TEST_CASE("report verdicts are reproducible from recorded numbers") {
  for (const auto& m : models()) {
    const auto r = audit_assumptions(*m, "bounded intervals are small sets");
    CHECK(r.small_sets == "bounded intervals are small sets");
    const auto j = nlohmann::json::parse(r.to_json());
    CHECK(j["checks"].size() == r.checks.size());
    for (const auto& c : r.checks) {
      if (c.name == "A3" || c.name.rfind("C3", 0) == 0 || c.name == "C8") continue;
      CHECK(judge_probes(c.values) == c.verdict);
    }
    CHECK_FALSE(r.table().empty());
  }
}

TEST_CASE("generator examples") {
  const auto shot = models()[0];
  const TestFunction constant{"one", [](double) { return 1.0; }, [](double) { return 0.0; }};
  CHECK(apply_generator(*shot, constant, 0.7).value == 0.0);
  const TestFunction id{"id", [](double x) { return x; }, [](double) { return 1.0; }};
  CHECK(apply_generator(*shot, id, 1.0).value == doctest::Approx(-0.5).epsilon(1e-12));
  const auto g10 = apply_generator(*shot, abs_test_function(), 10.0, {0.0});
  CHECK(g10.value <= -0.1);
}

TEST_CASE("generator of |x| matches the decomposition") {
  const auto f = abs_test_function();
  for (const auto& m : models()) {
    for (double x : {-50.0, -10.0, -2.0, -0.5, -0.01, 0.0, 0.3, 1.0, 7.0, 40.0}) {
      const auto g = apply_generator(*m, f, x, {0.0});
      const double d = generator_abs_decomposition(*m, x);
      CHECK_MESSAGE(std::abs(g.value - d) <= 1e-8 * std::max(1.0, std::abs(d)), m->name, " x=", x);
    }
  }
}

TEST_CASE("audits need an analytic jump law") {
  const auto base = models()[0];
  MonotoneMap g;
  g.g = [](double x) { return 2.0 * x; };
  g.derivative = [](double) { return 2.0; };
  g.inverse = [](double y) { return y / 2.0; };
  const auto t = transform_model(base, g);
  CHECK_THROWS_AS(check_moment_conditions(*t), MissingMetadata);
}
