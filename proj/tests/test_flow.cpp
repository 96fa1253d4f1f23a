#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doctest.h"
#include "pdmp/errors.hpp"
#include "pdmp/flow.hpp"

using namespace pdmp;

namespace {

ModelPtr shot() { return catalog("linear_shot_noise", {{"c", 1}, {"lambda0", 1}, {"alpha", 2}}); }
ModelPtr tanh_model() { return catalog("tanh_drift", {{"lambda0", 1}, {"alpha", 2}}); }
ModelPtr updrift() { return catalog("updrift_negjumps", {{"lambda0", 2}, {"alpha", 1}}); }
ModelPtr stress() { return catalog("stress_release", {{"beta", 1}, {"alpha", 1}}); }

std::vector<ModelPtr> all_models() { return {shot(), tanh_model(), updrift(), stress()}; }

FlowOptions numeric() {
  FlowOptions o;
  o.force_numeric = true;
  return o;
}

// Time for the orbit to travel from x to u, by quadrature of 1/mu.
double travel_time(const ModelSpec& m, double x, double u) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [&](double y) { return 1.0 / m.mu(y); }, x, u, 20, 1e-14);
}

}  // namespace

TEST_CASE("flow closed-form examples") {
  const FlowSolver lin(shot());
  CHECK(lin.flow(1.0, std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-14));
  for (const auto& m : all_models()) CHECK(FlowSolver(m).flow(0.37, 0.0) == 0.37);
  const FlowSolver th(tanh_model());
  CHECK(th.flow(std::asinh(1.0), std::log(2.0)) == doctest::Approx(std::asinh(0.5)).epsilon(1e-14));
  CHECK(std::asinh(0.5) == doctest::Approx(0.481212).epsilon(1e-6));
}

TEST_CASE("numeric flow agrees with the closed forms") {
  for (const auto& m : all_models()) {
    const FlowSolver exact(m);
    const FlowSolver num(strip_closed_forms(m));
    REQUIRE(exact.analytic());
    REQUIRE_FALSE(num.analytic());
    for (double x : {-4.0, -1.3, -0.2, 0.6, 2.5, 7.0}) {
      for (double t : {0.01, 0.3, 1.0, 2.7, 6.0}) {
        CHECK(std::abs(num.flow(x, t) - exact.flow(x, t)) <= 1e-10 * std::max(1.0, std::abs(exact.flow(x, t))));
        const double h = exact.hazard(x, t);
        CHECK(std::abs(num.hazard(x, t) - h) <= 1e-10 * std::max(1.0, h));
      }
    }
  }
}

TEST_CASE("hit_time examples and never cases") {
  const FlowSolver lin(shot());
  CHECK(lin.hit_time(2.0, 1.0).value() == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK_FALSE(lin.hit_time(1.0, 2.0).has_value());
  CHECK_FALSE(lin.hit_time(1.0, 0.0).has_value());   // attracting zero
  CHECK_FALSE(lin.hit_time(1.0, -0.5).has_value());  // beyond the zero
  CHECK_FALSE(lin.hit_time(1.0, 1.0).has_value());
  const FlowSolver th(tanh_model());
  CHECK(th.hit_time(std::asinh(4.0), std::asinh(2.0)).value() == doctest::Approx(std::log(2.0)).epsilon(1e-13));
  const FlowSolver thn(tanh_model(), numeric());
  CHECK(thn.hit_time(std::asinh(4.0), std::asinh(2.0)).value() == doctest::Approx(std::log(2.0)).epsilon(1e-11));
  CHECK_FALSE(thn.hit_time(1.0, 0.0).has_value());
  CHECK_FALSE(thn.hit_time(1.0, 1.5).has_value());
}

TEST_CASE("numeric hit_time matches the travel-time integral") {
  for (const auto& m : all_models()) {
    const FlowSolver num(m, numeric());
    for (auto [x, u] : std::vector<std::pair<double, double>>{{3.0, 1.0}, {-2.0, -0.5}, {0.5, 2.5}, {-1.0, 1.0}}) {
      const auto h = num.hit_time(x, u);
      const FlowSolver exact(m);
      const auto he = exact.hit_time(x, u);
      REQUIRE(h.has_value() == he.has_value());
      if (!h) continue;
      CHECK(std::abs(*h - travel_time(*m, x, u)) <= 1e-9 * std::max(1.0, *h));
    }
  }
}

TEST_CASE("semigroup and hit-time consistency on random trials") {
  for (const auto& base : all_models()) {
    for (const auto& opts : {FlowOptions{}, numeric()}) {
      const FlowSolver f(base, opts);
      Rng rng({99, 0}, SubStream::auxiliary);
      for (int trial = 0; trial < 100; ++trial) {
        const double x = -5.0 + 10.0 * rng.uniform();
        const double s = 5.0 * rng.uniform();
        const double t = 5.0 * rng.uniform();
        const double two_step = f.flow(f.flow(x, s), t);
        const double one_step = f.flow(x, s + t);
        CHECK(std::abs(two_step - one_step) <= 1e-9 * std::max(1.0, std::abs(one_step)));
        const double u = f.flow(x, s);
        if (u == x) continue;
        const auto h = f.hit_time(x, u);
        REQUIRE(h.has_value());
        CHECK(std::abs(f.flow(x, *h) - u) <= 1e-9 * std::max(1.0, std::abs(u)));
      }
    }
  }
}

TEST_CASE("occupation time examples") {
  const FlowSolver lin(shot());
  CHECK(lin.occupation_time(2.0, 1.0, 2.0, 10.0) == doctest::Approx(std::log(2.0)));
  CHECK(lin.occupation_time(2.0, 3.0, 4.0, 10.0) == 0.0);
  CHECK(lin.occupation_time(2.0, -1.0, -0.5, 10.0) == 0.0);
  CHECK(lin.occupation_time(0.0, -1.0, 1.0, 10.0) == 10.0);
  const FlowSolver th(tanh_model());
  const double x = std::asinh(4.0), a = std::asinh(1.0), b = std::asinh(2.0);
  CHECK(th.occupation_time(x, a, b, 10.0) == doctest::Approx(std::log(2.0)).epsilon(1e-13));
  // Riemann sum on a fine grid
  const double dt = 1e-5;
  double riemann = 0.0;
  for (double t = 0.5 * dt; t < 10.0; t += dt) {
    const double q = th.flow(x, t);
    if (q >= a && q <= b) riemann += dt;
  }
  CHECK(riemann == doctest::Approx(std::log(2.0)).epsilon(1e-4));
  const FlowSolver thn(tanh_model(), numeric());
  CHECK(thn.occupation_time(x, a, b, 10.0) == doctest::Approx(std::log(2.0)).epsilon(1e-10));
}

TEST_CASE("occupation time is additive in t_max and monotone in the band") {
  for (const auto& m : all_models()) {
    const FlowSolver f(m);
    Rng rng({5, 0}, SubStream::auxiliary);
    for (int trial = 0; trial < 50; ++trial) {
      const double x = -4.0 + 8.0 * rng.uniform();
      const double a = -3.0 + 3.0 * rng.uniform();
      const double b = a + 0.1 + 3.0 * rng.uniform();
      const double t1 = 3.0 * rng.uniform();
      const double t2 = 3.0 * rng.uniform();
      const double whole = f.occupation_time(x, a, b, t1 + t2);
      const double split = f.occupation_time(x, a, b, t1) + f.occupation_time(f.flow(x, t1), a, b, t2);
      CHECK(std::abs(whole - split) <= 1e-9);
      CHECK(f.occupation_time(x, a - 0.2, b + 0.2, t1) >= f.occupation_time(x, a, b, t1) - 1e-12);
    }
  }
}

TEST_CASE("hazard inversion examples") {
  ExpressionModelInput in;
  in.drift = "1";
  in.rate = "2";
  const FlowSolver constant(expression_model(in));
  CHECK(constant.invert_hazard(0.3, 1.0) == doctest::Approx(0.5).epsilon(1e-10));
  const FlowSolver sr(stress());
  CHECK(sr.invert_hazard(0.0, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  const FlowSolver srn(stress(), numeric());
  CHECK(srn.invert_hazard(0.0, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-10));
  const FlowSolver th(tanh_model());
  for (double x : {-2.0, 0.0, 3.0}) CHECK(th.invert_hazard(x, 0.7) == doctest::Approx(0.7));
}

TEST_CASE("hazard is monotone and inversion undoes it") {
  for (const auto& m : all_models()) {
    for (const auto& opts : {FlowOptions{}, numeric()}) {
      const FlowSolver f(m, opts);
      for (double x : {-3.0, -0.4, 0.2, 1.5}) {
        double prev = 0.0;
        for (double t = 0.25; t <= 4.0; t += 0.25) {
          const double h = f.hazard(x, t);
          CHECK(h >= prev);
          prev = h;
          if (h > 0.0 && m->lambda(f.flow(x, t)) > 0.0) {
            CHECK(std::abs(f.invert_hazard(x, h) - t) <= 1e-9 * std::max(1.0, t));
          }
        }
      }
    }
  }
}

TEST_CASE("updrift hazard waits for the rate to switch on") {
  const FlowSolver f(updrift(), numeric());
  CHECK(f.hazard(-1.0, 0.5) == 0.0);
  CHECK(f.hazard(-1.0, 2.0) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(f.invert_hazard(-1.0, 1.0) == doctest::Approx(1.5).epsilon(1e-10));
}

TEST_CASE("hazard ceiling and working interval errors") {
  ExpressionModelInput in;
  in.drift = "1";
  in.rate = "0";
  in.working_interval = {-10.0, 1e9};
  FlowOptions small;
  small.t_cap = 100.0;
  const FlowSolver idle(expression_model(in), small);
  CHECK_THROWS_AS(idle.invert_hazard(0.0, 1.0), HazardCeiling);
  const auto adv = idle.advance(0.0, 1.0, 5.0);
  CHECK_FALSE(adv.jumped);
  CHECK(adv.x_end == doctest::Approx(5.0));
  const FlowSolver up(updrift());
  CHECK_THROWS_AS(up.flow(0.0, 2e6), LeftWorkingInterval);
  const FlowSolver upn(updrift(), numeric());
  CHECK_THROWS_AS(upn.flow(999990.0, 20.0), LeftWorkingInterval);
}

TEST_CASE("orbit limits") {
  const FlowSolver lin(shot());
  CHECK(lin.orbit_limit(3.0) == 0.0);
  CHECK(lin.orbit_limit(-3.0) == 0.0);
  CHECK(lin.orbit_limit(0.0) == 0.0);
  const FlowSolver up(updrift());
  CHECK(up.orbit_limit(3.0) == 1e6);
}
