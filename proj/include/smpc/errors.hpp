#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace smpc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or invalid problem data (CLI exit code 1).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Problem data that violates one or more named invariants.
class ValidationError : public InputError {
 public:
  explicit ValidationError(std::vector<std::string> violations);

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// Riccati / Lyapunov iteration did not converge (CLI exit code 1).
class SynthesisError : public InputError {
 public:
  using InputError::InputError;
};

/// Constraint tightening or terminal-set construction failed (CLI exit code 2).
class DesignInfeasible : public Error {
 public:
  using Error::Error;
};

/// Solver or controller failure during closed-loop operation (CLI exit code 3).
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

/// A result violated an invariant that holds by construction. Always a bug.
class InternalError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

}  // namespace smpc
