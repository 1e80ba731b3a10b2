#pragma once

#include <stdexcept>
#include <string>

namespace illiq {

/// Argument outside the mathematical domain of an operation (s <= 0, alpha <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Inconsistent grid, run or file configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Closed-form routine called with state-dependent sigma or ell.
class UnsupportedRegime : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Theorem parameter window violated; the message names the inequality.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bad input data (nonpositive premium in a log fit, malformed CSV row).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A lower-order expansion term is missing.
class DependencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Quadrature that did not converge, singular linear system, time-step floor reached.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double estimate = 0.0)
      : std::runtime_error(what), estimate_(estimate) {}

  /// Error estimate (quadrature) or offending location (solver), when meaningful.
  double estimate() const noexcept { return estimate_; }

 private:
  double estimate_;
};

}  // namespace illiq
