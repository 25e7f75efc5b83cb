#include "lyacert/common.hpp"

#include <cmath>
#include <numbers>

namespace lyacert {

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = dist(rng);
  return out;
}

Matrix uniform(Eigen::Index rows, Eigen::Index cols, double low, double high, Rng& rng) {
  std::uniform_real_distribution<double> dist(low, high);
  Matrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = dist(rng);
  return out;
}

double wrap_angle(double angle) {
  constexpr double pi = std::numbers::pi;
  double wrapped = std::fmod(angle + pi, 2.0 * pi);
  if (wrapped < 0.0) wrapped += 2.0 * pi;
  wrapped -= pi;
  // fmod maps +pi to -pi; keep the half-open interval (-pi, pi].
  return wrapped == -pi ? pi : wrapped;
}

}  // namespace lyacert
