#include <doctest.h>

#include "checks.hpp"
#include "lyacert/algorithms/losses.hpp"

#include <algorithm>
#include <cmath>

using namespace lyacert;
using namespace lyacert::algorithms;

namespace {

struct Fixture {
  RunConfig config = testing::small_config("lsac", "pendulum");
  envs::EnvSpec spec = make_environment(config)->spec();
  Rng rng{41};
  SacAgent sac = make_sac_agent(spec, config, rng);
  PpoAgent ppo = make_ppo_agent(spec, config, rng);
  lyapunov::LyapunovFunction lyap = make_lyapunov(spec, config, rng);
  buffers::Batch batch = testing::random_batch(spec, 8, rng);
  Matrix noise = standard_normal(1, 8, rng);

  PpoMinibatch minibatch(double log_ratio_spread) {
    PpoMinibatch mb;
    mb.transitions = batch;
    mb.pre_tanh = ppo.policy.sample_batch(batch.states, noise).pre_tanh;
    mb.old_log_probs = ppo.policy.log_prob_batch(batch.states, mb.pre_tanh).log_probs;
    if (log_ratio_spread > 0) mb.old_log_probs += Vector(uniform(8, 1, -log_ratio_spread, log_ratio_spread, rng));
    mb.advantages = standard_normal(8, 1, rng);
    mb.returns = standard_normal(8, 1, rng);
    return mb;
  }
};

nn::DenseNet zeros_like(const nn::DenseNet& net) {
  return nn::DenseNet(net.layer_sizes(), net.hidden_activation(), net.output_activation());
}

}  // namespace

TEST_CASE("J_Q vanishes for zero critics and rewards") {
  Fixture f;
  f.sac.q = zeros_like(f.sac.q);
  f.sac.value_target = zeros_like(f.sac.value_target);
  f.batch.rewards.setZero();
  CHECK(sac_value_losses(f.batch, f.sac, f.noise).q.value == 0.0);
}

TEST_CASE("terminal transitions do not bootstrap") {
  Fixture f;
  f.sac.q = zeros_like(f.sac.q);
  f.batch.dones.setOnes();
  // Q = 0 and target = r, so J_Q = mean r^2 / 2 regardless of V_target.
  CHECK(sac_value_losses(f.batch, f.sac, f.noise).q.value ==
        doctest::Approx(0.5 * f.batch.rewards.squaredNorm() / 8.0));
}

TEST_CASE("SAC policy loss special cases") {
  Fixture f;
  f.sac.alpha = 0.0;
  f.sac.q = zeros_like(f.sac.q);
  CHECK(sac_policy_loss(f.batch, f.sac, f.noise).value == 0.0);

  Fixture g;
  g.sac.alpha = 0.0;
  const double before = sac_policy_loss(g.batch, g.sac, g.noise).value;
  g.sac.q.biases().back()(0) += 1.0;  // Q uniformly better under the policy
  CHECK(sac_policy_loss(g.batch, g.sac, g.noise).value == doctest::Approx(before - 1.0));
}

TEST_CASE("LSAC with beta = 0 is SAC exactly") {
  Fixture f;
  const Loss a = lsac_policy_loss(f.batch, f.sac, f.lyap, {0.0, 0.05, 1}, f.noise);
  const Loss b = sac_policy_loss(f.batch, f.sac, f.noise);
  CHECK(a.value == b.value);
  CHECK(testing::max_relative_error(a.grad, b.grad) == 0.0);
}

TEST_CASE("LSAC adds the hinge on the Lie derivative") {
  Fixture f;
  const LyapunovConfig cfg{0.7, 0.05, 1};
  const Vector lie = lyapunov::lie_derivatives(f.lyap, f.batch, f.sac.policy);
  const double hinge = (lie.array() + f.lyap.mu).max(0.0).mean();
  CHECK(lsac_policy_loss(f.batch, f.sac, f.lyap, cfg, f.noise).value ==
        doctest::Approx(sac_policy_loss(f.batch, f.sac, f.noise).value + 0.7 * hinge).epsilon(1e-12));
}

TEST_CASE("PPO objective at the old policy") {
  Fixture f;
  const PpoMinibatch mb = f.minibatch(0.0);
  CHECK(ppo_policy_loss(mb, f.ppo, mb.advantages).value == doctest::Approx(-mb.advantages.mean()).epsilon(1e-12));
  CHECK(ppo_policy_loss(mb, f.ppo, Vector::Zero(8)).value == 0.0);
}

TEST_CASE("PPO objective matches a branch-free oracle") {
  Fixture f;
  const PpoMinibatch mb = f.minibatch(0.6);
  const Vector lp = f.ppo.policy.log_prob_batch(mb.transitions.states, mb.pre_tanh).log_probs;
  double total = 0.0;
  int clipped = 0;
  for (int j = 0; j < 8; ++j) {
    const double rho = std::exp(lp(j) - mb.old_log_probs(j));
    const double c = std::min(std::max(rho, 0.8), 1.2);
    total += std::min(rho * mb.advantages(j), c * mb.advantages(j));
    if (c != rho) ++clipped;
  }
  REQUIRE(clipped > 0);
  CHECK(ppo_policy_loss(mb, f.ppo, mb.advantages).value == doctest::Approx(-total / 8.0).epsilon(1e-12));
}

TEST_CASE("single transition clipped value by hand") {
  Fixture f;
  PpoMinibatch mb = f.minibatch(0.0);
  mb.transitions = buffers::make_batch({mb.transitions.transition(0)});
  mb.pre_tanh = mb.pre_tanh.leftCols(1).eval();
  const double lp = f.ppo.policy.log_prob_batch(mb.transitions.states, mb.pre_tanh).log_probs(0);
  mb.old_log_probs = Vector::Constant(1, lp - std::log(1.5));  // rho = 1.5
  mb.advantages = Vector::Constant(1, 2.0);
  mb.returns = Vector::Zero(1);
  // min(1.5 * 2, 1.2 * 2) = 2.4
  CHECK(ppo_policy_loss(mb, f.ppo, mb.advantages).value == doctest::Approx(-2.4).epsilon(1e-12));
  // Lie + mu = 2 with beta = 0.5 lowers the advantage to 1: min(1.5, 1.2) = 1.2.
  CHECK(augmented_advantage(2.0, 2.0 - 0.05, {0.5, 0.05, 1}) == doctest::Approx(1.0));
  CHECK(ppo_policy_loss(mb, f.ppo, Vector::Constant(1, 1.0)).value == doctest::Approx(-1.2).epsilon(1e-12));
  // A negative advantage with rho = 1.5 keeps the unclipped branch: min(-1.5, -1.2) = -1.5.
  CHECK(ppo_policy_loss(mb, f.ppo, Vector::Constant(1, -1.0)).value == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("augmented advantage") {
  const LyapunovConfig cfg{0.5, 0.1, 1};
  CHECK(augmented_advantage(3.0, -0.1 - 1.0, cfg) == 3.0);
  CHECK(augmented_advantage(3.0, 2.0 - 0.1, cfg) == doctest::Approx(2.0));
  for (double lie : {-5.0, 0.0, 7.0}) CHECK(augmented_advantage(1.25, lie, {0.0, 0.1, 1}) == 1.25);
}

TEST_CASE("LPPO reduces to PPO when the hinge is inactive") {
  Fixture f;
  const PpoMinibatch mb = f.minibatch(0.3);
  const Loss ppo = ppo_policy_loss(mb, f.ppo, mb.advantages);
  const Loss zero_beta = lppo_policy_loss(mb, f.ppo, f.lyap, {0.0, 0.05, 1});
  CHECK(zero_beta.value == ppo.value);

  nn::DenseNet linear({4, 1}, nn::Activation::identity, nn::Activation::identity);
  linear.weights()[0](0, 0) = 1.0;
  f.lyap.net = linear;
  PpoMinibatch decreasing = mb;
  decreasing.transitions.next_states.row(0) = decreasing.transitions.states.row(0).array() - 1.0;
  const Loss inactive = lppo_policy_loss(decreasing, f.ppo, f.lyap, {2.0, 0.05, 1});
  const Loss plain = ppo_policy_loss(decreasing, f.ppo, decreasing.advantages);
  CHECK(inactive.value == plain.value);
  CHECK(testing::max_relative_error(inactive.grad, plain.grad) == 0.0);
}

TEST_CASE("value losses") {
  Fixture f;
  const PpoMinibatch mb = f.minibatch(0.0);
  const Vector v = f.ppo.value.forward(mb.transitions.states).row(0).transpose();
  CHECK(ppo_value_loss(mb, f.ppo).value == doctest::Approx(0.5 * (v - mb.returns).squaredNorm() / 8.0));
}

TEST_CASE("empty batches are rejected") {
  Fixture f;
  buffers::Batch empty{Matrix(3, 0), Matrix(1, 0), Vector(0), Matrix(3, 0), Vector(0)};
  CHECK_THROWS_AS(sac_value_losses(empty, f.sac, Matrix(1, 0)), ContractViolation);
  CHECK_THROWS_AS(sac_policy_loss(empty, f.sac, Matrix(1, 0)), ContractViolation);
  PpoMinibatch mb{empty, Matrix(1, 0), Vector(0), Vector(0), Vector(0)};
  CHECK_THROWS_AS(ppo_policy_loss(mb, f.ppo, Vector(0)), ContractViolation);
  CHECK_THROWS_AS(ppo_value_loss(mb, f.ppo), ContractViolation);
}

TEST_CASE("gradient suite on two configurations") {
  const testing::Outcome out = testing::gradient_suite(2);
  for (const auto& f : out.failures) MESSAGE(f);
  CHECK(out.pass());
}

TEST_CASE("policy initialization settings") {
  auto config = testing::small_config("ppo", "quadrotor");
  config.policy_init_scale = 0.5;
  config.policy_init_log_std = -1.5;
  auto reference = config;
  reference.policy_init_scale = 1.0;
  reference.policy_init_log_std = 0.0;
  const auto env = make_environment(config);
  Rng a(8), b(8);
  const PpoAgent scaled = make_ppo_agent(env->spec(), config, a);
  const PpoAgent plain = make_ppo_agent(env->spec(), reference, b);
  const auto& ws = scaled.policy.trunk().weights().back();
  const auto& wp = plain.policy.trunk().weights().back();
  CHECK((ws - 0.5 * wp).cwiseAbs().maxCoeff() == 0.0);
  CHECK(scaled.policy.trunk().biases().back().head(4).isZero());
  CHECK((scaled.policy.trunk().biases().back().tail(4).array() == -1.5).all());
  CHECK(scaled.value.weights().back() == plain.value.weights().back());
}
