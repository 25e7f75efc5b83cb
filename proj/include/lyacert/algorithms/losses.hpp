#pragma once

#include "lyacert/algorithms/config.hpp"
#include "lyacert/buffers/buffers.hpp"
#include "lyacert/lyapunov/lyapunov.hpp"
#include "lyacert/nn/policy.hpp"

#include <optional>

namespace lyacert::algorithms {

struct SacAgent {
  nn::SquashedGaussianPolicy policy;
  nn::DenseNet q;                  // Q(s ++ a)
  std::optional<nn::DenseNet> q2;  // second critic when twin-Q is enabled
  nn::DenseNet value;              // V_psi(s)
  nn::DenseNet value_target;       // V_psi_bar(s), same shape as value
  double alpha = 0.2;
  double gamma = 0.99;
  double tau = 0.005;
};

struct PpoAgent {
  nn::SquashedGaussianPolicy policy;
  nn::DenseNet value;
  double clip_eps = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
};

struct LyapunovConfig {
  double beta = 1.0;
  double mu = 0.01;
  int steps = 1;
};

SacAgent make_sac_agent(const envs::EnvSpec& spec, const RunConfig& config, Rng& rng);
PpoAgent make_ppo_agent(const envs::EnvSpec& spec, const RunConfig& config, Rng& rng);
lyapunov::LyapunovFunction make_lyapunov(const envs::EnvSpec& spec, const RunConfig& config,
                                         Rng& rng);
std::vector<int> hidden_layers(const RunConfig& config);

struct Loss {
  double value = 0.0;
  nn::Gradient grad;
};

struct SacValueLosses {
  Loss value;               // J_V, gradient w.r.t. psi
  Loss q;                   // J_Q, gradient w.r.t. theta
  std::optional<Loss> q2;
};

/// J_Q = mean 1/2 (Q(s,a) - (r + gamma (1 - done) V_target(s')))^2
/// J_V = mean 1/2 (V(s) - (Q(s,a~) - alpha log pi(a~|s)))^2 with a~ drawn from `noise`.
SacValueLosses sac_value_losses(const buffers::Batch& batch, const SacAgent& agent,
                                const Matrix& noise);

/// mean[alpha log pi(a~|s) - Q(s, a~)], reparameterized through `noise`; gradient w.r.t. phi.
Loss sac_policy_loss(const buffers::Batch& batch, const SacAgent& agent, const Matrix& noise);

/// sac_policy_loss + beta mean max(0, lie + mu); the hinge reaches phi through pi(s').
Loss lsac_policy_loss(const buffers::Batch& batch, const SacAgent& agent,
                      const lyapunov::LyapunovFunction& lyap, const LyapunovConfig& config,
                      const Matrix& noise);

/// On-policy minibatch: transitions plus what the behaviour policy recorded.
struct PpoMinibatch {
  buffers::Batch transitions;
  Matrix pre_tanh;
  Vector old_log_probs;
  Vector advantages;
  Vector returns;
};

/// -mean min(rho A, clip(rho, 1 - eps, 1 + eps) A), rho = pi / pi_old.
Loss ppo_policy_loss(const PpoMinibatch& minibatch, const PpoAgent& agent,
                     const Vector& advantages);

/// A + beta min(0, -(lie + mu)).
double augmented_advantage(double advantage, double lie_value, const LyapunovConfig& config);

/// ppo_policy_loss on augmented advantages. Lie values use the current policy and are
/// treated as data.
Loss lppo_policy_loss(const PpoMinibatch& minibatch, const PpoAgent& agent,
                      const lyapunov::LyapunovFunction& lyap, const LyapunovConfig& config);

/// Same objective with the Lie values supplied, one per minibatch column.
Loss lppo_policy_loss(const PpoMinibatch& minibatch, const PpoAgent& agent, const Vector& lie,
                      const LyapunovConfig& config);

/// mean 1/2 (V(s) - R)^2.
Loss ppo_value_loss(const PpoMinibatch& minibatch, const PpoAgent& agent);

}  // namespace lyacert::algorithms
