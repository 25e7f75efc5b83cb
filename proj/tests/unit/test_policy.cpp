#include <doctest.h>

#include "checks.hpp"
#include "lyacert/nn/policy.hpp"

#include <cmath>

using namespace lyacert;
using lyacert::nn::SquashedGaussianPolicy;

namespace {

SquashedGaussianPolicy make_policy(int sd, int ad, Rng& rng) {
  return SquashedGaussianPolicy::random(sd, Vector::Constant(ad, -2.0), Vector::Constant(ad, 3.0),
                                        {6, 6}, nn::Activation::tanh, rng);
}

}  // namespace

TEST_CASE("squashed density integrates to one over the action interval") {
  Rng rng(11);
  const SquashedGaussianPolicy policy = make_policy(2, 1, rng);
  const Vector s{{0.3, -0.7}};
  // Integrate p(a(u)) da/du over u with the trapezoid rule.
  const int n = 40001;
  const Vector u = Vector::LinSpaced(n, -12.0, 12.0);
  const Matrix states = s.replicate(1, n);
  const auto lp = policy.log_prob_batch(states, u.transpose());
  const Vector jac = 2.5 * (1.0 - u.array().tanh().square());
  const Vector f = lp.log_probs.array().exp() * jac.array();
  const double du = u(1) - u(0);
  const double integral = du * (f.sum() - 0.5 * (f(0) + f(n - 1)));
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("samples stay inside the bounds and the mean action is the squashed mean") {
  Rng rng(12);
  const SquashedGaussianPolicy policy = make_policy(3, 2, rng);
  const Matrix states = standard_normal(3, 50, rng);
  const auto sample = policy.sample_batch(states, 3.0 * standard_normal(2, 50, rng));
  CHECK((sample.actions.array() >= -2.0).all());
  CHECK((sample.actions.array() <= 3.0).all());
  const auto mean = policy.mean_batch(states);
  const Matrix expected = ((2.5 * sample.head.mean.array().tanh()) + 0.5).matrix();
  CHECK((mean.actions - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((policy.mean_action(states.col(4)) - mean.actions.col(4)).norm() < 1e-15);
}

TEST_CASE("sample log-probability matches the explicit formula") {
  Rng rng(13);
  const SquashedGaussianPolicy policy = make_policy(2, 2, rng);
  const Vector s{{1.0, 0.5}};
  const Vector eps{{0.3, -1.2}};
  const auto sample = policy.sample(s, eps);
  const auto head = policy.sample_batch(s, eps).head;
  double expected = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double u = sample.pre_tanh(i);
    expected += -0.5 * eps(i) * eps(i) - head.log_std(i, 0) - 0.5 * std::log(2 * M_PI) -
                std::log(2.5 * (1 - std::tanh(u) * std::tanh(u)));
  }
  CHECK(sample.log_prob == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("policy backward passes agree with finite differences") {
  Rng rng(14);
  SquashedGaussianPolicy policy = make_policy(3, 2, rng);
  const Matrix states = standard_normal(3, 5, rng);
  const Matrix noise = standard_normal(2, 5, rng);
  const Matrix ca = standard_normal(2, 5, rng);
  const Vector cl = standard_normal(5, 1, rng);
  auto& trunk = policy.trunk();

  const auto sample = policy.sample_batch(states, noise);
  const auto g_sample = policy.backward_sample(sample, ca, cl);
  const auto n_sample = testing::numeric_gradient(trunk, [&] {
    const auto b = policy.sample_batch(states, noise);
    return (b.actions.array() * ca.array()).sum() + b.log_probs.dot(cl);
  });
  CHECK(testing::max_relative_error(g_sample, n_sample) < 1e-5);

  const auto mean = policy.mean_batch(states);
  const auto g_mean = policy.backward_mean(mean, ca);
  const auto n_mean = testing::numeric_gradient(
      trunk, [&] { return (policy.mean_batch(states).actions.array() * ca.array()).sum(); });
  CHECK(testing::max_relative_error(g_mean, n_mean) < 1e-5);

  const Matrix u = sample.pre_tanh;
  const auto lp = policy.log_prob_batch(states, u);
  const auto g_lp = policy.backward_log_prob(lp, cl);
  const auto n_lp = testing::numeric_gradient(
      trunk, [&] { return policy.log_prob_batch(states, u).log_probs.dot(cl); });
  CHECK(testing::max_relative_error(g_lp, n_lp) < 1e-5);
}

TEST_CASE("clamped log-std passes no gradient") {
  Rng rng(15);
  SquashedGaussianPolicy policy = make_policy(2, 1, rng);
  policy.trunk().biases().back()(1) = 50.0;  // raw log-std far above the upper clamp
  const Matrix states = standard_normal(2, 4, rng);
  const auto sample = policy.sample_batch(states, standard_normal(1, 4, rng));
  CHECK((sample.head.std.array() == std::exp(2.0)).all());
  const auto g = policy.backward_sample(sample, Matrix::Ones(1, 4), Vector::Ones(4));
  CHECK(g.biases.back()(1) == 0.0);
  CHECK(g.biases.back()(0) != 0.0);
}
