#pragma once

#include <stdexcept>
#include <string>

namespace topoforge {

// Invalid argument, dimension mismatch or out-of-range configuration.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Scenario or file content that violates a domain invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The reduced stiffness matrix could not be factored (unsupported load path).
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Lagrange-multiplier bisection left its bracket without hitting the target.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double lambda_lo, double lambda_hi)
      : std::runtime_error(what), lambda_lo_(lambda_lo), lambda_hi_(lambda_hi) {}

  double lambda_lo() const { return lambda_lo_; }
  double lambda_hi() const { return lambda_hi_; }

 private:
  double lambda_lo_;
  double lambda_hi_;
};

// Stored data failed its checksum or structural check.
class CorruptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace topoforge
