#pragma once

#include <stdexcept>
#include <string>

namespace daf {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed images, mismatched files, out-of-contract values.
/// The CLI maps this family to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Tensor shape or spatial-size contract violated.
class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Unknown key, unparsable value or invariant violation in a configuration.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A training loss became non-finite. The message carries the diagnostic snapshot.
class TrainingDivergence : public Error {
 public:
  using Error::Error;
};

}  // namespace daf
