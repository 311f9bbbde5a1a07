#pragma once

#include <stdexcept>
#include <string>

namespace driftmt {

// Invalid input (dimension mismatch, bad measure, malformed config).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of a formula (c = 1 at the
// interpolation threshold, s0 requested for c < 1, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Iterative solver did not reach the requested residual.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what), last_residual(residual) {}
  double last_residual;
};

// Non-finite integrand, vanishing denominator and the like.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing columns or unparseable input data.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace driftmt
