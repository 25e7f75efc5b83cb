#include "lyacert/algorithms/losses.hpp"

#include <algorithm>
#include <cmath>

namespace lyacert::algorithms {

namespace {

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

void require_batch(const buffers::Batch& batch) {
  require(batch.size() > 0, "loss: empty batch");
}

nn::DenseNet mlp(int in, int out, const RunConfig& config, int width, Rng& rng) {
  std::vector<int> sizes{in};
  for (int l = 0; l < config.hidden_layers; ++l) sizes.push_back(width);
  sizes.push_back(out);
  return nn::DenseNet::random(sizes, nn::activation_from_string(config.activation),
                              nn::Activation::identity, rng);
}

}  // namespace

std::vector<int> hidden_layers(const RunConfig& config) {
  return std::vector<int>(static_cast<std::size_t>(config.hidden_layers), config.hidden_width);
}

namespace {

nn::SquashedGaussianPolicy make_policy(const envs::EnvSpec& spec, const RunConfig& config,
                                       Rng& rng) {
  auto policy = nn::SquashedGaussianPolicy::random(
      spec.observation_dim, spec.action_low, spec.action_high, hidden_layers(config),
      nn::activation_from_string(config.activation), rng);
  policy.trunk().weights().back() *= config.policy_init_scale;
  policy.trunk().biases().back().tail(spec.action_dim).setConstant(config.policy_init_log_std);
  return nn::SquashedGaussianPolicy(std::move(policy.trunk()), policy.action_scale(),
                                    policy.action_bias(), config.log_std_min,
                                    config.log_std_max);
}

}  // namespace

SacAgent make_sac_agent(const envs::EnvSpec& spec, const RunConfig& config, Rng& rng) {
  SacAgent agent;
  agent.policy = make_policy(spec, config, rng);
  const int sa = spec.observation_dim + spec.action_dim;
  agent.q = mlp(sa, 1, config, config.hidden_width, rng);
  if (config.twin_q) agent.q2 = mlp(sa, 1, config, config.hidden_width, rng);
  agent.value = mlp(spec.observation_dim, 1, config, config.hidden_width, rng);
  agent.value_target = agent.value;
  agent.alpha = config.alpha;
  agent.gamma = config.gamma;
  agent.tau = config.tau;
  return agent;
}

PpoAgent make_ppo_agent(const envs::EnvSpec& spec, const RunConfig& config, Rng& rng) {
  PpoAgent agent;
  agent.policy = make_policy(spec, config, rng);
  agent.value = mlp(spec.observation_dim, 1, config, config.hidden_width, rng);
  agent.clip_eps = config.clip_eps;
  agent.gamma = config.gamma;
  agent.gae_lambda = config.gae_lambda;
  return agent;
}

lyapunov::LyapunovFunction make_lyapunov(const envs::EnvSpec& spec, const RunConfig& config,
                                         Rng& rng) {
  const bool state_only = config.algorithm() == Algorithm::lppo_onpolicy_risk;
  return lyapunov::LyapunovFunction::random(
      spec.observation_dim, spec.action_dim,
      std::vector<int>(static_cast<std::size_t>(config.hidden_layers), config.lyapunov_width),
      nn::activation_from_string(config.activation), config.mu, spec.dt, spec.goal, rng,
      state_only);
}

SacValueLosses sac_value_losses(const buffers::Batch& batch, const SacAgent& agent,
                                const Matrix& noise) {
  require_batch(batch);
  const Eigen::Index n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  SacValueLosses out;

  // Soft state-value target from a fresh policy sample.
  const auto sample = agent.policy.sample_batch(batch.states, noise);
  const Matrix fresh = stack(batch.states, sample.actions);
  Vector q_fresh = agent.q.forward(fresh).row(0).transpose();
  if (agent.q2) q_fresh = q_fresh.cwiseMin(Vector(agent.q2->forward(fresh).row(0).transpose()));
  const Vector v_target = q_fresh - agent.alpha * sample.log_probs;

  const nn::ForwardCache v_cache = agent.value.forward_cached(batch.states);
  const Vector v_err = v_cache.output().row(0).transpose() - v_target;
  out.value.value = 0.5 * v_err.squaredNorm() * inv_n;
  out.value.grad = agent.value.backward(v_cache, v_err.transpose() * inv_n).params;

  // Bellman target through the slow value network.
  const Vector next_v = agent.value_target.forward(batch.next_states).row(0).transpose();
  const Vector y = batch.rewards.array() +
                   agent.gamma * (1.0 - batch.dones.array()) * next_v.array();
  const Matrix taken = stack(batch.states, batch.actions);
  auto critic_loss = [&](const nn::DenseNet& q) {
    const nn::ForwardCache cache = q.forward_cached(taken);
    const Vector err = cache.output().row(0).transpose() - y;
    return Loss{0.5 * err.squaredNorm() * inv_n,
                q.backward(cache, err.transpose() * inv_n).params};
  };
  out.q = critic_loss(agent.q);
  if (agent.q2) out.q2 = critic_loss(*agent.q2);
  return out;
}

Loss sac_policy_loss(const buffers::Batch& batch, const SacAgent& agent, const Matrix& noise) {
  require_batch(batch);
  const Eigen::Index n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto sample = agent.policy.sample_batch(batch.states, noise);
  const Matrix inputs = stack(batch.states, sample.actions);

  const nn::ForwardCache c1 = agent.q.forward_cached(inputs);
  std::optional<nn::ForwardCache> c2;
  if (agent.q2) c2 = agent.q2->forward_cached(inputs);

  Matrix cot1 = Matrix::Zero(1, n);
  Matrix cot2 = Matrix::Zero(1, n);
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    double q = c1.output()(0, j);
    bool first = true;
    if (c2 && c2->output()(0, j) < q) {
      q = c2->output()(0, j);
      first = false;
    }
    total += agent.alpha * sample.log_probs(j) - q;
    (first ? cot1 : cot2)(0, j) = -inv_n;
  }

  const Eigen::Index sd = batch.states.rows();
  Matrix d_actions = agent.q.backward(c1, cot1).inputs.bottomRows(inputs.rows() - sd);
  if (c2) d_actions += agent.q2->backward(*c2, cot2).inputs.bottomRows(inputs.rows() - sd);
  const Vector d_log_probs = Vector::Constant(n, agent.alpha * inv_n);
  return Loss{total * inv_n, agent.policy.backward_sample(sample, d_actions, d_log_probs)};
}

Loss lsac_policy_loss(const buffers::Batch& batch, const SacAgent& agent,
                      const lyapunov::LyapunovFunction& lyap, const LyapunovConfig& config,
                      const Matrix& noise) {
  Loss loss = sac_policy_loss(batch, agent, noise);
  if (config.beta == 0.0) return loss;
  lyapunov::DecreasePenalty penalty = lyapunov::decrease_penalty(batch, lyap, agent.policy);
  loss.value += config.beta * penalty.value;
  penalty.policy_grad *= config.beta;
  loss.grad += penalty.policy_grad;
  return loss;
}

Loss ppo_policy_loss(const PpoMinibatch& minibatch, const PpoAgent& agent,
                     const Vector& advantages) {
  const Eigen::Index n = minibatch.transitions.size();
  require(n > 0, "loss: empty batch");
  require(advantages.size() == n && minibatch.old_log_probs.size() == n,
          "ppo_policy_loss: minibatch size mismatch");
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto lp = agent.policy.log_prob_batch(minibatch.transitions.states, minibatch.pre_tanh);

  Vector d_log_probs(n);
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double ratio = std::exp(lp.log_probs(j) - minibatch.old_log_probs(j));
    const double clipped = std::clamp(ratio, 1.0 - agent.clip_eps, 1.0 + agent.clip_eps);
    const double unclipped_obj = ratio * advantages(j);
    const double clipped_obj = clipped * advantages(j);
    const bool take_unclipped = unclipped_obj <= clipped_obj;
    total += take_unclipped ? unclipped_obj : clipped_obj;
    // The clipped branch is constant in phi.
    d_log_probs(j) = take_unclipped ? -inv_n * advantages(j) * ratio : 0.0;
  }
  return Loss{-total * inv_n, agent.policy.backward_log_prob(lp, d_log_probs)};
}

double augmented_advantage(double advantage, double lie_value, const LyapunovConfig& config) {
  return advantage + config.beta * std::min(0.0, -(lie_value + config.mu));
}

Loss lppo_policy_loss(const PpoMinibatch& minibatch, const PpoAgent& agent,
                      const lyapunov::LyapunovFunction& lyap, const LyapunovConfig& config) {
  if (config.beta == 0.0) return ppo_policy_loss(minibatch, agent, minibatch.advantages);
  return lppo_policy_loss(minibatch, agent,
                          lyapunov::lie_derivatives(lyap, minibatch.transitions, agent.policy),
                          config);
}

Loss lppo_policy_loss(const PpoMinibatch& minibatch, const PpoAgent& agent, const Vector& lie,
                      const LyapunovConfig& config) {
  if (config.beta == 0.0) return ppo_policy_loss(minibatch, agent, minibatch.advantages);
  require(lie.size() == minibatch.advantages.size(), "lppo_policy_loss: lie size mismatch");
  Vector augmented(lie.size());
  for (Eigen::Index j = 0; j < lie.size(); ++j)
    augmented(j) = augmented_advantage(minibatch.advantages(j), lie(j), config);
  return ppo_policy_loss(minibatch, agent, augmented);
}

Loss ppo_value_loss(const PpoMinibatch& minibatch, const PpoAgent& agent) {
  const Eigen::Index n = minibatch.transitions.size();
  require(n > 0, "loss: empty batch");
  require(minibatch.returns.size() == n, "ppo_value_loss: returns size mismatch");
  const nn::ForwardCache cache = agent.value.forward_cached(minibatch.transitions.states);
  const Vector err = cache.output().row(0).transpose() - minibatch.returns;
  const double inv_n = 1.0 / static_cast<double>(n);
  return Loss{0.5 * err.squaredNorm() * inv_n,
              agent.value.backward(cache, err.transpose() * inv_n).params};
}

}  // namespace lyacert::algorithms
