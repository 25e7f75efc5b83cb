#pragma once

#include "lyacert/buffers/buffers.hpp"
#include "lyacert/nn/dense_net.hpp"
#include "lyacert/nn/policy.hpp"

namespace lyacert::lyapunov {

/// Learned Lyapunov candidate L(s, a) with its decrease margin mu, the sampling interval dt
/// and the goal state s_G. The output is unconstrained; positivity is only encouraged by the
/// risk.
///
/// With state_only set the network reads s alone. That variant reproduces the on-policy
/// baseline, where the finite difference runs between consecutive states and no policy
/// action enters.
struct LyapunovFunction {
  nn::DenseNet net;
  double mu = 0.0;
  double dt = 0.0;
  Vector goal;
  bool state_only = false;

  static LyapunovFunction random(int state_dim, int action_dim, const std::vector<int>& hidden,
                                 nn::Activation activation, double mu, double dt, Vector goal,
                                 Rng& rng, bool state_only = false);

  int state_dim() const { return static_cast<int>(goal.size()); }
  double value(const Vector& state, const Vector& action) const;
  double value(const Vector& state) const;
  /// One value per column; `actions` is ignored when state_only.
  Vector values(const Matrix& states, const Matrix& actions) const;
};

/// (L(s', pi(s')) - L(s, a)) / dt with pi the deterministic policy mean. For a state-only
/// function this is (L(s') - L(s)) / dt.
double lie_derivative(const LyapunovFunction& lyap, const Vector& state, const Vector& action,
                      const Vector& next_state, const nn::SquashedGaussianPolicy& policy);

/// Column-wise lie_derivative over a batch.
Vector lie_derivatives(const LyapunovFunction& lyap, const buffers::Batch& batch,
                       const nn::SquashedGaussianPolicy& policy);

/// (L(s') - L(s)) / dt for a state-only function.
double on_policy_lie_derivative(const LyapunovFunction& lyap, const Vector& state,
                                const Vector& next_state);

struct Risk {
  double value = 0.0;
  nn::Gradient grad;     // w.r.t. the Lyapunov network; policy outputs are held constant
  double certification = 0.0;  // same forward pass evaluated with mu = 0
  Eigen::Index violations = 0;  // transitions with a strictly positive Lie derivative
};

/// mean_batch[max(0, -L(s,a)) + max(0, lie + margin)] + L(s_G, pi(s_G))^2.
Risk lyapunov_risk(const buffers::Batch& batch, const LyapunovFunction& lyap,
                   const nn::SquashedGaussianPolicy& policy, double margin);

/// lyapunov_risk with margin = lyap.mu.
Risk training_risk(const buffers::Batch& batch, const LyapunovFunction& lyap,
                   const nn::SquashedGaussianPolicy& policy);

/// lyapunov_risk with margin = 0: zero iff the sampled Lyapunov conditions hold.
double certification_risk(const buffers::Batch& batch, const LyapunovFunction& lyap,
                          const nn::SquashedGaussianPolicy& policy);

/// mean_batch[max(0, -L(s)) + max(0, (L(s') - L(s)) / dt)] + L(s_G)^2 for a state-only L.
Risk on_policy_risk(const buffers::Batch& batch, const LyapunovFunction& lyap);

/// Monte-Carlo E_{a ~ pi(.|s)} L(s, a) over `samples` policy draws.
double state_lyapunov(const LyapunovFunction& lyap, const nn::SquashedGaussianPolicy& policy,
                      const Vector& state, int samples, Rng& rng);

struct DecreasePenalty {
  double value = 0.0;          // mean_batch max(0, lie + mu)
  nn::Gradient policy_grad;    // through pi(s') only
  Eigen::Index active = 0;     // transitions with lie + mu > 0
};

/// Hinge on the decrease condition, differentiated w.r.t. the policy parameters.
DecreasePenalty decrease_penalty(const buffers::Batch& batch, const LyapunovFunction& lyap,
                                 const nn::SquashedGaussianPolicy& policy);

}  // namespace lyacert::lyapunov
