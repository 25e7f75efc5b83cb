#include "lyacert/nn/adam.hpp"

#include <cmath>

namespace lyacert::nn {

AdamState::AdamState(const DenseNet& net, AdamConfig config)
    : config(config), first_moment(net.zero_gradient()), second_moment(net.zero_gradient()) {
  require(config.learning_rate > 0 && config.beta1 > 0 && config.beta1 < 1 &&
              config.beta2 > 0 && config.beta2 < 1 && config.epsilon > 0,
          "AdamConfig: hyperparameters out of range");
}

void adam_step(DenseNet& net, const Gradient& grad, AdamState& state) {
  require(grad.weights.size() == net.num_layers() &&
              state.first_moment.weights.size() == net.num_layers(),
          "adam_step: gradient/state does not match the network");
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    require(grad.weights[l].rows() == net.weights()[l].rows() &&
                grad.weights[l].cols() == net.weights()[l].cols() &&
                grad.biases[l].size() == net.biases()[l].size(),
            "adam_step: gradient shape mismatch");
  }
  if (!grad.all_finite()) throw NumericalError("adam_step: non-finite gradient rejected");

  const AdamConfig& c = state.config;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);

  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    param.array() -= c.learning_rate * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + c.epsilon);
  };
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    update(net.weights()[l], grad.weights[l], state.first_moment.weights[l],
           state.second_moment.weights[l]);
    update(net.biases()[l], grad.biases[l], state.first_moment.biases[l],
           state.second_moment.biases[l]);
  }
  if (!net.all_finite()) throw NumericalError("adam_step: parameters became non-finite");
}

}  // namespace lyacert::nn
