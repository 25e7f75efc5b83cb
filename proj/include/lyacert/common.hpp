#pragma once

#include <Eigen/Dense>

#include <random>
#include <stdexcept>
#include <string>

namespace lyacert {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Raised when a caller breaks a documented precondition (shape, range, emptiness).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when a computation produces or receives non-finite values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

/// Matrix of i.i.d. N(0, 1) draws, filled in column-major order.
Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Uniform draws in [low, high), filled in column-major order.
Matrix uniform(Eigen::Index rows, Eigen::Index cols, double low, double high, Rng& rng);

/// Angle wrapped to (-pi, pi].
double wrap_angle(double angle);

}  // namespace lyacert
