#pragma once

#include <stdexcept>
#include <string>

namespace pdmp {

/// Malformed or incomplete run configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model that violates its declared contract (CLI exit code 3).
class ModelValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Analytic metadata (limits, m±, MGF) required by an operation but not declared.
class MissingMetadata : public ModelValidationError {
 public:
  using ModelValidationError::ModelValidationError;
};

/// Failure while simulating or integrating (CLI exit code 4).
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Integrated hazard stayed below the drawn mark up to the time cap.
class HazardCeiling : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

/// Orbit left the model's working interval.
class LeftWorkingInterval : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

/// Not enough data for a statistical procedure.
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pdmp
