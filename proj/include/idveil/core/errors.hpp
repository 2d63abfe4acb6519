#pragma once

#include <stdexcept>
#include <string>

namespace idveil {

// Raised for invalid configuration before any side effect takes place.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a backend component is unavailable or misbehaves.
struct BackendError : std::runtime_error {
  explicit BackendError(const std::string& what) : std::runtime_error(what) {}
};

// Raised for file system and serialization failures.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when training hits a non-finite loss.
struct TrainingDiverged : std::runtime_error {
  explicit TrainingDiverged(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace idveil
