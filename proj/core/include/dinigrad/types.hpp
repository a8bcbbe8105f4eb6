#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dinigrad {

/// Dense matrices and vectors used throughout are tiny (at most 2n x 2n with
/// n <= 3), so storage is inline with a fixed capacity of 6.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 6, 6>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 6, 1>;

/// A point of R^n, n in {2,3}. Unused trailing components are zero.
using Point = std::array<double, 3>;

inline double dot(const Point& a, const Point& b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

/// Base class of all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments or violated preconditions (unsupported dimension,
/// malformed inputs, misaligned grids).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Scenario or configuration problems (unknown keys, out-of-range values).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed: contraction lost, step-size underflow.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ContractionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class StepUnderflowError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

inline void check_dimension(int n) {
  if (n != 2 && n != 3) {
    throw DomainError("unsupported dimension " + std::to_string(n) + " (expected 2 or 3)");
  }
}

}  // namespace dinigrad
