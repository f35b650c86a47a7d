#pragma once

#include <stdexcept>
#include <string>

namespace freqprior {

/// Thrown when an argument violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a dense materialization would exceed the configured size cap.
/// Callers should fall back to the matrix-free routines.
class ResourceLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace freqprior
