#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pdmp/model.hpp"
#include "pdmp/simulate.hpp"

namespace pdmp {

constexpr int kConfigSchemaVersion = 1;

struct RunBlock {
  double x0 = 0.0;
  StopRule stop;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  std::uint64_t replications = 1;
  int workers = 0;
};

struct CppBlock {
  std::optional<double> rho;  ///< defaults to the model's rho
  double horizon = 100.0;
  double window = 1.0;
  std::uint64_t windows = 0;  ///< Monte Carlo windows for the Laplace table
};

struct AnalysisBlock {
  std::optional<double> base_level;
  std::vector<double> levels;
  std::vector<double> targets;
  std::vector<double> density_grid;
  std::optional<double> bandwidth;  ///< default: 0.02 IQR of a pilot run
  double batch_time = 100.0;
  double sample_rate = 1.0;
  double window = 5.0;
  double gap_resolution = 0.05;  ///< scaled gaps below this count as one cluster
  std::vector<double> laplace_z{0.5, 1.0, 2.0};
  std::uint64_t replications = 0;  ///< fresh first-passage replications
  std::string small_sets = "not declared";
  CppBlock cpp;
};

struct OutputBlock {
  std::string dir = "out";
  bool csv = true;
  bool json = true;
};

struct RunConfig {
  int version = kConfigSchemaVersion;
  ModelPtr model;
  std::string model_source;  ///< catalog name or "expression"
  RunBlock run;
  AnalysisBlock analysis;
  OutputBlock output;
  std::string canonical;  ///< normalized document the hash is taken over
  std::string hash;       ///< 16 hex digits
};

/// Parses a YAML RunConfig. seed_override replaces run.seed before hashing.
/// Throws ConfigError naming the offending field, or ModelValidationError
/// when the model itself is invalid.
RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override = {});
RunConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed_override = {});

/// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& data);

}  // namespace pdmp
