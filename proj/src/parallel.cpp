#include "pdmp/parallel.hpp"

#include <algorithm>
#include <exception>
#include <mutex>

#include <omp.h>

#include "pdmp/limits.hpp"

namespace pdmp {

namespace {

// Runs body(i) for i in [0, n) on the requested workers and rethrows the
// exception of the lowest failing index.
template <class Body>
void parallel_for(std::size_t n, int workers, Body body) {
  std::exception_ptr error;
  std::size_t error_index = n;
  std::mutex m;
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(effective_workers(workers))
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(m);
      if (static_cast<std::size_t>(i) < error_index) {
        error_index = static_cast<std::size_t>(i);
        error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

struct ChunkResult {
  std::vector<std::uint32_t> counts;
  std::array<std::uint64_t, kMaxMultiplicity> atoms{};
  std::array<std::uint64_t, kMaxMultiplicity> atoms_sq{};
};

ChunkResult window_chunk(double rho, double len, std::size_t size, std::uint64_t seed, std::uint64_t stream) {
  ChunkResult r;
  r.counts.reserve(size);
  Rng rng({seed, stream}, SubStream::auxiliary);
  std::vector<std::uint32_t> atoms;
  std::array<std::uint64_t, kMaxMultiplicity> per{};
  for (std::size_t i = 0; i < size; ++i) {
    atoms.clear();
    r.counts.push_back(static_cast<std::uint32_t>(sample_window_count(rho, len, rng, &atoms)));
    per.fill(0);
    for (auto k : atoms) ++per[std::min<std::size_t>(k, kMaxMultiplicity) - 1];
    for (std::size_t k = 0; k < kMaxMultiplicity; ++k) {
      r.atoms[k] += per[k];
      r.atoms_sq[k] += per[k] * per[k];
    }
  }
  return r;
}

WindowSample assemble(std::vector<ChunkResult>& chunks) {
  WindowSample out;
  for (auto& c : chunks) {
    out.counts.insert(out.counts.end(), c.counts.begin(), c.counts.end());
    for (std::size_t k = 0; k < kMaxMultiplicity; ++k) {
      out.atoms[k] += c.atoms[k];
      out.atoms_sq[k] += c.atoms_sq[k];
    }
  }
  return out;
}

std::size_t chunk_size(std::size_t n, std::size_t c) { return std::min(kWindowChunk, n - c * kWindowChunk); }

}  // namespace

int effective_workers(int workers) { return workers > 0 ? workers : omp_get_max_threads(); }

std::vector<double> first_passages_parallel(const Simulator& sim, double x0, double b, std::size_t n,
                                            std::uint64_t seed, std::uint64_t first_stream, int workers,
                                            double time_limit) {
  std::vector<double> out(n);
  parallel_for(n, workers, [&](std::size_t i) {
    out[i] = first_passage_time(sim, x0, b, {seed, first_stream + i}, time_limit);
  });
  return out;
}

std::vector<double> first_passages_serial(const Simulator& sim, double x0, double b, std::size_t n,
                                          std::uint64_t seed, std::uint64_t first_stream, double time_limit) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = first_passage_time(sim, x0, b, {seed, first_stream + i}, time_limit);
  return out;
}

WindowSample geom_cpp_windows_parallel(double rho, double len, std::size_t n, std::uint64_t seed,
                                       std::uint64_t first_stream, int workers) {
  const std::size_t nchunks = (n + kWindowChunk - 1) / kWindowChunk;
  std::vector<ChunkResult> chunks(nchunks);
  parallel_for(nchunks, workers, [&](std::size_t c) {
    chunks[c] = window_chunk(rho, len, chunk_size(n, c), seed, first_stream + c);
  });
  return assemble(chunks);
}

WindowSample geom_cpp_windows_serial(double rho, double len, std::size_t n, std::uint64_t seed,
                                     std::uint64_t first_stream) {
  const std::size_t nchunks = (n + kWindowChunk - 1) / kWindowChunk;
  std::vector<ChunkResult> chunks;
  for (std::size_t c = 0; c < nchunks; ++c)
    chunks.push_back(window_chunk(rho, len, chunk_size(n, c), seed, first_stream + c));
  return assemble(chunks);
}

std::vector<FoldData> fold_replications_parallel(const Simulator& sim, double x0, const StopRule& stop,
                                                 const FoldConfig& config, std::size_t n, std::uint64_t seed,
                                                 std::uint64_t first_stream, int workers) {
  std::vector<FoldData> out(n);
  parallel_for(n, workers, [&](std::size_t i) {
    out[i] = fold_run(sim, x0, stop, {seed, first_stream + i}, config);
  });
  return out;
}

std::vector<FoldData> fold_replications_serial(const Simulator& sim, double x0, const StopRule& stop,
                                               const FoldConfig& config, std::size_t n, std::uint64_t seed,
                                               std::uint64_t first_stream) {
  std::vector<FoldData> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(fold_run(sim, x0, stop, {seed, first_stream + i}, config));
  return out;
}

std::vector<Trajectory> trajectories_parallel(const Simulator& sim, double x0, const StopRule& stop, std::size_t n,
                                              std::uint64_t seed, std::uint64_t first_stream, int workers) {
  std::vector<Trajectory> out(n);
  parallel_for(n, workers, [&](std::size_t i) { out[i] = sim.simulate(x0, stop, {seed, first_stream + i}); });
  return out;
}

std::vector<Trajectory> trajectories_serial(const Simulator& sim, double x0, const StopRule& stop, std::size_t n,
                                            std::uint64_t seed, std::uint64_t first_stream) {
  std::vector<Trajectory> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(sim.simulate(x0, stop, {seed, first_stream + i}));
  return out;
}

}  // namespace pdmp
