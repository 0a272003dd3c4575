#pragma once

#include <stdexcept>
#include <string>

namespace foreco {

/// Bad input: shapes, ranges, unknown options, missing data.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Estimator tag recognized but not implemented (or unknown altogether).
class UnsupportedEstimator : public ValidationError {
 public:
  explicit UnsupportedEstimator(const std::string& tag)
      : ValidationError("unsupported estimator: " + tag), tag_(tag) {}
  const std::string& tag() const noexcept { return tag_; }

 private:
  std::string tag_;
};

/// Numerical failure: singular systems, infeasible programs, non-convergence.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace foreco
