#include <cmath>

#include "doctest.h"
#include "pdmp/errors.hpp"
#include "pdmp/estimate.hpp"

using namespace pdmp;

namespace {

ModelPtr shot() { return catalog("linear_shot_noise", {{"c", 1}, {"lambda0", 1}, {"alpha", 2}}); }

ModelPtr pure_flow(const std::string& drift) {
  ExpressionModelInput in;
  in.drift = drift;
  in.rate = "0";
  return expression_model(in);
}

// Stationary law of the shot-noise model above: Gamma(1, 2).
double band_average(double u, double h) { return (std::exp(-2.0 * (u - h)) - std::exp(-2.0 * (u + h))) / (2.0 * h); }

}  // namespace

TEST_CASE("band density definition on a pure flow") {
  const Simulator sim(pure_flow("-1"));
  FoldConfig cfg;
  cfg.batch_time = 1.0;
  cfg.density_grid = {1.0};
  cfg.bandwidth = 0.1;
  const auto data = fold_run(sim, 2.0, StopRule::at_horizon(5.0), {1, 0}, cfg);
  REQUIRE(data.batches() == 5);
  const auto d = estimate_density(data, sim.spec());
  CHECK(d.value[0] == doctest::Approx(0.2));
  CHECK(data.trailing_time == doctest::Approx(0.0));
}

TEST_CASE("occupation over a partition adds up") {
  const Simulator sim(shot());
  FoldConfig part, whole;
  part.batch_time = whole.batch_time = 50.0;
  part.bandwidth = 0.05;
  for (int i = 0; i < 10; ++i) part.density_grid.push_back(0.55 + 0.1 * i);
  whole.bandwidth = 0.5;
  whole.density_grid = {1.0};
  const auto a = fold_run(sim, 1.0, StopRule::at_horizon(2000.0), {5, 0}, part);
  const auto b = fold_run(sim, 1.0, StopRule::at_horizon(2000.0), {5, 0}, whole);
  REQUIRE(a.batches() == b.batches());
  double sa = 0.0, sb = 0.0;
  for (double v : a.occupation) sa += v;
  for (double v : b.occupation) sb += v;
  CHECK(sa == doctest::Approx(sb).epsilon(1e-9));
}

TEST_CASE("gamma estimate from small count lists") {
  const auto s = cycle_count_stats(std::vector<std::uint64_t>{1, 1, 2}, 3.0);
  const auto g = gamma_hat(s);
  CHECK(g.gamma == doctest::Approx(0.25));
  CHECK(g.positive_cycles == 3);
  CHECK_FALSE(g.sufficient);
  CHECK(gamma_hat(cycle_count_stats(std::vector<std::uint64_t>{0, 1, 1, 0})).gamma == 0.0);
  CHECK_THROWS_AS(gamma_hat(cycle_count_stats(std::vector<std::uint64_t>{0, 0})), InsufficientData);
}

TEST_CASE("base-level intensity times mean cycle length is one") {
  const Simulator sim(shot());
  FoldConfig cfg;
  cfg.base_level = 1.0;
  cfg.levels = {1.0, 2.0};
  const auto data = fold_run(sim, 2.0, StopRule::after_cycles(2000, 1.0), {7, 0}, cfg);
  REQUIRE(data.batches() == 2000);
  const auto nu = estimate_intensities(data, 1.0, sim.spec()).nu;
  const double mean_len = data.observed_time() / data.batches();
  CHECK(nu.estimate * mean_len == doctest::Approx(1.0));
  CHECK(data.burn_in_time > 0.0);
}

TEST_CASE("fold agrees with the stored-path cycle decomposition") {
  const Simulator sim(shot());
  const auto traj = sim.simulate(2.0, StopRule::after_cycles(300, 1.0), {13, 2});
  const auto dec = cycle_decompose(traj, 1.0, {2.0});
  FoldConfig cfg;
  cfg.base_level = 1.0;
  cfg.levels = {2.0};
  const auto data = fold_trajectory(traj, cfg);
  REQUIRE(data.batches() == dec.cycles.size());
  for (std::size_t i = 0; i < dec.cycles.size(); ++i) {
    CHECK(data.start[i] == dec.cycles[i].start);
    CHECK(data.length[i] == doctest::Approx(dec.cycles[i].length()));
    CHECK(data.at(i, 0).continuous() == dec.cycles[i].targets[0].crossings);
    CHECK(data.at(i, 0).up() == dec.cycles[i].targets[0].upcrossings);
  }
  const auto streamed = fold_run(sim, 2.0, StopRule::after_cycles(300, 1.0), {13, 2}, cfg);
  CHECK(streamed.length == data.length);
}

TEST_CASE("merge is associative") {
  const Simulator sim(shot());
  FoldConfig cfg;
  cfg.base_level = 1.0;
  cfg.levels = {0.5, 2.0};
  cfg.density_grid = {0.5};
  cfg.bandwidth = 0.05;
  cfg.sample_rate = 1.0;
  std::vector<FoldData> parts;
  for (std::uint64_t s = 0; s < 3; ++s)
    parts.push_back(fold_run(sim, 1.0, StopRule::after_cycles(50, 1.0), {3, s}, cfg));
  FoldData left = parts[0];
  left.merge(parts[1]);
  left.merge(parts[2]);
  FoldData bc = parts[1];
  bc.merge(parts[2]);
  FoldData right = parts[0];
  right.merge(bc);
  CHECK(left.length == right.length);
  CHECK(left.occupation == right.occupation);
  CHECK(left.jumps == right.jumps);
  REQUIRE(left.states.size() == right.states.size());
  for (std::size_t i = 0; i < left.states.size(); ++i) CHECK(left.states[i].batch == right.states[i].batch);
  CHECK(left.batches() == 150);
  FoldConfig other = cfg;
  other.levels = {0.7};
  const auto mismatched = fold_run(sim, 1.0, StopRule::after_cycles(5, 1.0), {3, 9}, other);
  CHECK_THROWS_AS(left.merge(mismatched), std::invalid_argument);
}

TEST_CASE("density and crossing intensity match the Gamma stationary law") {
  const Simulator sim(shot());
  FoldConfig cfg;
  cfg.base_level = 1.0;
  cfg.levels = {0.5, 1.0, 1.5};
  cfg.density_grid = {0.5, 1.0, 1.5};
  cfg.bandwidth = 0.05;
  const auto data = fold_run(sim, 1.0, StopRule::after_cycles(40000, 1.0), {17, 0}, cfg);
  const auto d = estimate_density(data, sim.spec());
  std::vector<Intensities> in;
  for (double u : cfg.levels) in.push_back(estimate_intensities(data, u, sim.spec()));
  for (std::size_t i = 0; i < 3; ++i) {
    const double u = cfg.levels[i];
    CHECK(std::abs(d.value[i] - band_average(u, 0.05)) <= 4.0 * d.se[i]);
    const double nu = u * 2.0 * std::exp(-2.0 * u);
    CHECK(std::abs(in[i].nu.estimate - nu) <= 4.0 * in[i].nu.se);
    CHECK(in[i].minus_d.estimate == 0.0);
  }
  for (const auto& r : rice_residual(d, in, sim.spec())) {
    CHECK(std::abs(r.residual) <= 4.0);
    CHECK(std::abs(r.balance_residual) <= 4.0);
  }
}

TEST_CASE("Rice residual is zero on exact inputs") {
  const auto spec = shot();
  DensityEstimate d;
  d.grid = {1.0};
  d.bandwidth = 0.1;
  d.value = {0.5};
  d.se = {0.0};
  Intensities in;
  in.nu = {1.0, IntensityEstimate::Kind::nu, 0.5, 0.0, 0, 0};
  in.plus_d = {1.0, IntensityEstimate::Kind::nu_plus_d, 0.5, 0.0, 0, 0};
  in.minus_d = {1.0, IntensityEstimate::Kind::nu_minus_d, 0.0, 0.0, 0, 0};
  const auto rows = rice_residual(d, {in}, *spec);
  CHECK(rows[0].residual == 0.0);
  CHECK(rows[0].balance_residual == 0.0);
  CHECK(rows[0].relative_error == 0.0);
}

TEST_CASE("band density agrees with Poisson-sampled state histogram") {
  const Simulator sim(shot());
  FoldConfig cfg;
  cfg.base_level = 1.0;
  cfg.density_grid = {0.3, 0.8};
  cfg.bandwidth = 0.05;
  cfg.sample_rate = 1.0;
  const auto data = fold_run(sim, 1.0, StopRule::after_cycles(30000, 1.0), {19, 0}, cfg);
  const auto d = estimate_density(data, sim.spec());
  for (std::size_t i = 0; i < 2; ++i) {
    const double c = cfg.density_grid[i];
    const auto hist = state_mean(data.states, [&](double x) { return std::abs(x - c) <= 0.05 ? 10.0 : 0.0; });
    CHECK(std::abs(hist.mean - d.value[i]) <= 4.0 * std::hypot(hist.se, d.se[i]));
  }
}

TEST_CASE("jump-crossing intensity by counting and by integral") {
  const Simulator sim(shot());
  FoldConfig cfg;
  cfg.base_level = 1.0;
  cfg.levels = {1.0};
  cfg.sample_rate = 2.0;
  const auto data = fold_run(sim, 1.0, StopRule::after_cycles(30000, 1.0), {23, 0}, cfg);
  const auto counted = estimate_intensities(data, 1.0, sim.spec());
  const auto integral = intensity_by_integral(sim.spec(), data.states, 1.0, {23, 1});
  CHECK(std::abs(counted.plus_d.estimate - integral.plus_d.estimate) <=
        4.0 * std::hypot(counted.plus_d.se, integral.plus_d.se));
  CHECK(integral.minus_d.estimate == 0.0);
  const auto lp = compare_lambda_pi(data, sim.spec());
  CHECK(lp.by_states.mean == doctest::Approx(1.0));
  CHECK(std::abs(lp.standardized_gap) <= 4.0);
}

TEST_CASE("stationarity residual") {
  const Simulator sim(shot());
  FoldConfig cfg;
  cfg.base_level = 1.0;
  cfg.sample_rate = 1.0;
  const auto data = fold_run(sim, 1.0, StopRule::after_cycles(40000, 1.0), {29, 0}, cfg);
  TestFunction constant{"one", [](double) { return 1.0; }, [](double) { return 0.0; }};
  const auto res = stationarity_residual(sim.spec(), data.states, {bump_test_function(1.0, 0.5), constant}, {29, 1});
  CHECK(std::abs(res[0].residual) <= 4.0);
  CHECK(res[0].lhs < 0.0);
  CHECK(res[1].lhs == 0.0);
  CHECK(res[1].rhs == 0.0);
  CHECK(res[1].residual == 0.0);
}

TEST_CASE("bump test function") {
  const auto b = bump_test_function(1.0, 0.5);
  CHECK(b.f(0.0) == 0.0);
  CHECK(b.f(1.0) == doctest::Approx(0.5 * 8.0 / 15.0));
  CHECK(b.f(3.0) == doctest::Approx(0.5 * 16.0 / 15.0));
  CHECK(b.df(1.0) == 1.0);
  CHECK(b.df(1.5) == 0.0);
  const double eps = 1e-6;
  for (double x : {0.6, 0.9, 1.2, 1.45}) CHECK((b.f(x + eps) - b.f(x - eps)) / (2 * eps) == doctest::Approx(b.df(x)).epsilon(1e-6));
}

TEST_CASE("estimator input errors") {
  const Simulator sim(shot());
  FoldConfig cfg;
  cfg.base_level = 1.0;
  cfg.density_grid = {0.01};
  cfg.bandwidth = 0.02;
  const auto data = fold_run(sim, 1.0, StopRule::after_cycles(10, 1.0), {1, 0}, cfg);
  CHECK_THROWS_AS(estimate_density(data, sim.spec()), ConfigError);
  FoldConfig zero;
  zero.levels = {0.0};
  CHECK_THROWS_AS(PathFold(sim.flow(), zero, {1, 0}), ModelValidationError);
  CHECK_THROWS_AS(data.level_index(3.0), std::invalid_argument);
}

TEST_CASE("default bandwidth is a fiftieth of the IQR") {
  std::vector<StateSample> s;
  for (int i = 0; i <= 100; ++i) s.push_back({0.0, static_cast<double>(i), 0});
  CHECK(default_bandwidth(s) == doctest::Approx(1.0));
}
