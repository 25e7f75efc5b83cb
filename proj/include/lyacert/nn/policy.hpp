#pragma once

#include "lyacert/nn/dense_net.hpp"

namespace lyacert::nn {

/// Stochastic policy a = scale * tanh(mean + std * noise) + bias.
///
/// The trunk emits 2m values per state: rows [0, m) are the Gaussian mean, rows [m, 2m)
/// the raw log standard deviation, which is clamped to [log_std_min, log_std_max] before
/// exponentiation. Log-densities include the tanh change-of-variables correction.
class SquashedGaussianPolicy {
 public:
  SquashedGaussianPolicy() = default;
  SquashedGaussianPolicy(DenseNet trunk, Vector action_scale, Vector action_bias,
                         double log_std_min = -20.0, double log_std_max = 2.0);

  /// Random trunk with the given hidden widths; scale and bias are derived from the bounds.
  static SquashedGaussianPolicy random(int state_dim, const Vector& action_low,
                                       const Vector& action_high, const std::vector<int>& hidden,
                                       Activation hidden_activation, Rng& rng);

  int state_dim() const { return trunk_.input_size(); }
  int action_dim() const { return static_cast<int>(action_scale_.size()); }
  const Vector& action_scale() const { return action_scale_; }
  const Vector& action_bias() const { return action_bias_; }
  double log_std_min() const { return log_std_min_; }
  double log_std_max() const { return log_std_max_; }

  DenseNet& trunk() { return trunk_; }
  const DenseNet& trunk() const { return trunk_; }

  struct Sample {
    Vector action;
    Vector pre_tanh;
    double log_prob = 0.0;
  };

  Sample sample(const Vector& state, const Vector& noise) const;
  Vector mean_action(const Vector& state) const;

  /// Trunk activations plus the decoded Gaussian head; shared by the batched evaluators.
  struct HeadPass {
    ForwardCache trunk;
    Matrix mean;
    Matrix log_std;       // after clamping
    Matrix std;
    Matrix log_std_open;  // 1 where the clamp is inactive, else 0
  };

  struct SampleBatch {
    HeadPass head;
    Matrix noise;
    Matrix pre_tanh;
    Matrix actions;
    Vector log_probs;
  };

  struct MeanBatch {
    HeadPass head;
    Matrix actions;
  };

  struct LogProbBatch {
    HeadPass head;
    Matrix pre_tanh;
    Vector log_probs;
  };

  SampleBatch sample_batch(const Matrix& states, const Matrix& noise) const;
  MeanBatch mean_batch(const Matrix& states) const;
  /// log pi(a|s) for actions given by their pre-squash values.
  LogProbBatch log_prob_batch(const Matrix& states, const Matrix& pre_tanh) const;

  /// Trunk parameter gradient for an objective with the given partials (noise held fixed).
  Gradient backward_sample(const SampleBatch& batch, const Matrix& d_actions,
                           const Vector& d_log_probs) const;
  Gradient backward_mean(const MeanBatch& batch, const Matrix& d_actions) const;
  Gradient backward_log_prob(const LogProbBatch& batch, const Vector& d_log_probs) const;

 private:
  HeadPass head(const Matrix& states) const;
  Gradient backward_head(const HeadPass& head, const Matrix& d_mean, const Matrix& d_log_std) const;
  Matrix squash(const Matrix& pre_tanh) const;
  Vector log_jacobian(const Matrix& pre_tanh) const;

  DenseNet trunk_;
  Vector action_scale_;
  Vector action_bias_;
  double log_std_min_ = -20.0;
  double log_std_max_ = 2.0;
};

}  // namespace lyacert::nn
