#pragma once

#include <stdexcept>
#include <string>

namespace icrl {

// Base class for all errors raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration, bad shapes, unknown names. CLI exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

// Shape/dimension mismatch between tensors or feature spaces.
struct DimensionError : ConfigError {
  using ConfigError::ConfigError;
};

// Non-finite values detected where finite ones are required.
struct NumericalError : Error {
  using Error::Error;
};

// A solver exhausted its iteration budget without meeting its target.
// CLI exit code 3.
struct ConvergenceError : Error {
  using Error::Error;
};

// File system / serialization failures. CLI exit code 4.
struct IoError : Error {
  using Error::Error;
};

}  // namespace icrl
