#pragma once

#include "lyacert/nn/dense_net.hpp"

namespace lyacert::nn {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moments for one DenseNet. Shapes mirror the owning network.
struct AdamState {
  AdamState() = default;
  AdamState(const DenseNet& net, AdamConfig config);

  AdamConfig config;
  Gradient first_moment;
  Gradient second_moment;
  long step_count = 0;
};

/// Bias-corrected Adam update. Throws NumericalError (leaving net and state untouched)
/// when the gradient holds NaN/Inf.
void adam_step(DenseNet& net, const Gradient& grad, AdamState& state);

}  // namespace lyacert::nn
