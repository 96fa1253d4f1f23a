#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pdmp/estimate.hpp"
#include "pdmp/simulate.hpp"

namespace pdmp {

/// Replication i always runs on stream first_stream + i, so results do not
/// depend on the worker count. workers <= 0 uses the OpenMP default.

/// Fresh first-passage times T(b) from x0, one per replication.
std::vector<double> first_passages_parallel(const Simulator& sim, double x0, double b, std::size_t n,
                                            std::uint64_t seed, std::uint64_t first_stream, int workers,
                                            double time_limit = 1e300);
std::vector<double> first_passages_serial(const Simulator& sim, double x0, double b, std::size_t n,
                                          std::uint64_t seed, std::uint64_t first_stream,
                                          double time_limit = 1e300);

/// n independent windows of Pi_rho of length len. Windows are drawn in
/// chunks of kWindowChunk, chunk c on stream first_stream + c.
constexpr std::size_t kWindowChunk = 4096;
constexpr std::size_t kMaxMultiplicity = 8;

struct WindowSample {
  std::vector<std::uint32_t> counts;  ///< Pi_rho(B) per window
  /// Over all windows: sum and sum of squares of the number of atoms with
  /// multiplicity k (index k - 1; the last index collects k >= kMaxMultiplicity).
  std::array<std::uint64_t, kMaxMultiplicity> atoms{};
  std::array<std::uint64_t, kMaxMultiplicity> atoms_sq{};
};

WindowSample geom_cpp_windows_parallel(double rho, double len, std::size_t n, std::uint64_t seed,
                                       std::uint64_t first_stream, int workers);
WindowSample geom_cpp_windows_serial(double rho, double len, std::size_t n, std::uint64_t seed,
                                     std::uint64_t first_stream);

/// Independent folded runs, replication i on stream first_stream + i, returned in order.
std::vector<FoldData> fold_replications_parallel(const Simulator& sim, double x0, const StopRule& stop,
                                                 const FoldConfig& config, std::size_t n, std::uint64_t seed,
                                                 std::uint64_t first_stream, int workers);
std::vector<FoldData> fold_replications_serial(const Simulator& sim, double x0, const StopRule& stop,
                                               const FoldConfig& config, std::size_t n, std::uint64_t seed,
                                               std::uint64_t first_stream);

/// Stored trajectories, replication i on stream first_stream + i.
std::vector<Trajectory> trajectories_parallel(const Simulator& sim, double x0, const StopRule& stop, std::size_t n,
                                              std::uint64_t seed, std::uint64_t first_stream, int workers);
std::vector<Trajectory> trajectories_serial(const Simulator& sim, double x0, const StopRule& stop, std::size_t n,
                                            std::uint64_t seed, std::uint64_t first_stream);

/// Number of threads an OpenMP region would use for the given request.
int effective_workers(int workers);

}  // namespace pdmp
