#include "doctest.h"
#include "pdmp/errors.hpp"
#include "pdmp/parallel.hpp"

using namespace pdmp;

namespace {

ModelPtr shot() { return catalog("linear_shot_noise", {{"c", 1}, {"lambda0", 1}, {"alpha", 2}}); }

}  // namespace

TEST_CASE("parallel first passages equal the serial reference") {
  const Simulator sim(shot());
  const auto ref = first_passages_serial(sim, 1.0, 3.0, 64, 99, 0);
  for (int w : {1, 2, 4}) CHECK(first_passages_parallel(sim, 1.0, 3.0, 64, 99, 0, w) == ref);
  CHECK(first_passages_serial(sim, 1.0, 3.0, 64, 99, 1) != ref);
  CHECK_THROWS_AS(first_passages_parallel(sim, 1.0, 30.0, 8, 99, 0, 2, 1.0), SimulationError);
}

TEST_CASE("parallel Pi_rho windows equal the serial reference") {
  for (double rho : {0.0, 0.5}) {
    const auto ref = geom_cpp_windows_serial(rho, 1.0, 3 * kWindowChunk + 17, 5, 10);
    REQUIRE(ref.counts.size() == 3 * kWindowChunk + 17);
    for (int w : {1, 3}) {
      const auto par = geom_cpp_windows_parallel(rho, 1.0, 3 * kWindowChunk + 17, 5, 10, w);
      CHECK(par.counts == ref.counts);
      CHECK(par.atoms == ref.atoms);
      CHECK(par.atoms_sq == ref.atoms_sq);
    }
    std::uint64_t mass = 0, atom_mass = 0;
    for (auto c : ref.counts) mass += c;
    for (std::size_t k = 0; k + 1 < kMaxMultiplicity; ++k) atom_mass += (k + 1) * ref.atoms[k];
    CHECK(atom_mass <= mass);
    if (rho == 0.0) CHECK(ref.atoms[0] == mass);
  }
}

TEST_CASE("parallel folds equal the serial reference") {
  const Simulator sim(shot());
  FoldConfig cfg;
  cfg.base_level = 1.0;
  cfg.levels = {2.0};
  cfg.density_grid = {0.5};
  cfg.bandwidth = 0.05;
  cfg.sample_rate = 1.0;
  const auto stop = StopRule::after_cycles(100, 1.0);
  const auto ref = fold_replications_serial(sim, 1.0, stop, cfg, 6, 3, 0);
  const auto par = fold_replications_parallel(sim, 1.0, stop, cfg, 6, 3, 0, 3);
  REQUIRE(par.size() == ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    CHECK(par[i].length == ref[i].length);
    CHECK(par[i].occupation == ref[i].occupation);
    CHECK(par[i].states.size() == ref[i].states.size());
  }
}

TEST_CASE("parallel trajectories equal the serial reference") {
  const Simulator sim(shot());
  const auto stop = StopRule::after_events(500);
  const auto ref = trajectories_serial(sim, 0.5, stop, 5, 8, 2);
  const auto par = trajectories_parallel(sim, 0.5, stop, 5, 8, 2, 3);
  REQUIRE(par.size() == ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    CHECK(par[i].jumps == ref[i].jumps);
    CHECK(par[i].horizon == ref[i].horizon);
    CHECK(par[i].rng.stream == 2 + i);
  }
}
