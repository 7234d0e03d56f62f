#pragma once

#include <stdexcept>
#include <string>

namespace covbound {

/// Bad configuration or violated precondition on user-supplied input.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical failure: undefined quantity, non-convergence, unsupported size.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Explicit covariance matrix with an eigenvalue below the PSD tolerance.
class NotPositiveSemidefiniteError : public ConfigError {
 public:
  NotPositiveSemidefiniteError(const std::string& what, double most_negative)
      : ConfigError(what), most_negative_(most_negative) {}
  double most_negative_eigenvalue() const { return most_negative_; }

 private:
  double most_negative_;
};

/// Effective rank requested for the zero operator.
class UndefinedRankError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Exact l-infinity to l1 norm requested above the enumeration cap.
class UnsupportedSizeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace covbound
