#pragma once

#include <stdexcept>
#include <string>

namespace neunet {

// Error taxonomy shared by every module. The CLI maps these onto exit codes.

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shapes, channel counts or spacings that do not line up.
struct DimensionError : Error {
  using Error::Error;
};

/// A caller-supplied value outside the accepted domain.
struct ArgumentError : Error {
  using Error::Error;
};

/// Inconsistent network or run configuration.
struct ConfigError : Error {
  using Error::Error;
};

/// An operation that needs content got an empty (all-zero) volume.
struct EmptyContentError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

/// NaN/Inf produced during training.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace neunet
