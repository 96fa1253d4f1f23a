#include <benchmark/benchmark.h>

#include "pdmp/estimate.hpp"
#include "pdmp/parallel.hpp"

using namespace pdmp;

namespace {

ModelPtr shot() { return catalog("linear_shot_noise", {{"c", 1}, {"lambda0", 1}, {"alpha", 2}}); }
ModelPtr tanh_model() { return catalog("tanh_drift", {{"lambda0", 1}, {"alpha", 2}}); }

void BM_FlowAnalytic(benchmark::State& state) {
  const FlowSolver f(tanh_model());
  double t = 0.0;
  for (auto _ : state) {
    t = t < 5.0 ? t + 0.01 : 0.0;
    benchmark::DoNotOptimize(f.flow(1.5, t));
  }
}
BENCHMARK(BM_FlowAnalytic);

void BM_FlowNumeric(benchmark::State& state) {
  const FlowSolver f(tanh_model(), FlowOptions{.force_numeric = true});
  double t = 0.0;
  for (auto _ : state) {
    t = t < 5.0 ? t + 0.01 : 0.0;
    benchmark::DoNotOptimize(f.flow(1.5, t));
  }
}
BENCHMARK(BM_FlowNumeric);

void BM_SimulateEvents(benchmark::State& state) {
  const Simulator sim(shot());
  std::uint64_t stream = 0;
  for (auto _ : state) {
    const auto t = sim.simulate(0.5, StopRule::after_events(state.range(0)), {1, stream++});
    benchmark::DoNotOptimize(t.x_final);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateEvents)->Arg(10000);

void BM_FoldCycles(benchmark::State& state) {
  const Simulator sim(shot());
  FoldConfig c;
  c.base_level = 0.5;
  c.levels = {0.5, 1.0, 2.0};
  c.density_grid = {0.5, 1.0};
  c.bandwidth = 0.01;
  c.sample_rate = 1.0;
  std::uint64_t stream = 0;
  for (auto _ : state) {
    const auto d = fold_run(sim, 0.5, StopRule::after_cycles(state.range(0), 0.5), {2, stream++}, c);
    benchmark::DoNotOptimize(d.batches());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FoldCycles)->Arg(10000);

void BM_FirstPassagesSerial(benchmark::State& state) {
  const Simulator sim(shot());
  for (auto _ : state) benchmark::DoNotOptimize(first_passages_serial(sim, 1.0, 3.0, 256, 3, 0));
}
BENCHMARK(BM_FirstPassagesSerial);

void BM_FirstPassagesParallel(benchmark::State& state) {
  const Simulator sim(shot());
  for (auto _ : state)
    benchmark::DoNotOptimize(first_passages_parallel(sim, 1.0, 3.0, 256, 3, 0, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_FirstPassagesParallel)->Arg(1)->Arg(2)->Arg(4);

void BM_WindowsSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(geom_cpp_windows_serial(0.5, 1.0, 100000, 4, 0).counts.size());
}
BENCHMARK(BM_WindowsSerial);

void BM_WindowsParallel(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(
        geom_cpp_windows_parallel(0.5, 1.0, 100000, 4, 0, static_cast<int>(state.range(0))).counts.size());
}
BENCHMARK(BM_WindowsParallel)->Arg(1)->Arg(2)->Arg(4);

}  // namespace

BENCHMARK_MAIN();
