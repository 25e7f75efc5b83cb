#include "lyacert/lyapunov/lyapunov.hpp"

#include <algorithm>

namespace lyacert::lyapunov {

namespace {

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

void check_batch(const buffers::Batch& batch, const LyapunovFunction& lyap) {
  require(batch.size() > 0, "Lyapunov risk: empty batch");
  require(batch.states.rows() == lyap.state_dim(), "Lyapunov risk: state dimension mismatch");
  require(lyap.dt > 0.0, "Lyapunov function: dt must be positive");
}

}  // namespace

LyapunovFunction LyapunovFunction::random(int state_dim, int action_dim,
                                          const std::vector<int>& hidden,
                                          nn::Activation activation, double mu, double dt,
                                          Vector goal, Rng& rng, bool state_only) {
  require(goal.size() == state_dim, "LyapunovFunction: goal dimension mismatch");
  std::vector<int> sizes{state_only ? state_dim : state_dim + action_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return LyapunovFunction{
      nn::DenseNet::random(sizes, activation, nn::Activation::identity, rng), mu, dt,
      std::move(goal), state_only};
}

double LyapunovFunction::value(const Vector& state, const Vector& action) const {
  if (state_only) return value(state);
  require(state.size() + action.size() == net.input_size(),
          "LyapunovFunction: input width must be state_dim + action_dim");
  Vector input(state.size() + action.size());
  input << state, action;
  return net.forward(input)(0);
}

double LyapunovFunction::value(const Vector& state) const {
  require(state_only, "LyapunovFunction: state-action function needs an action");
  return net.forward(state)(0);
}

Vector LyapunovFunction::values(const Matrix& states, const Matrix& actions) const {
  if (state_only) return net.forward(states).row(0).transpose();
  return net.forward(stack(states, actions)).row(0).transpose();
}

double lie_derivative(const LyapunovFunction& lyap, const Vector& state, const Vector& action,
                      const Vector& next_state, const nn::SquashedGaussianPolicy& policy) {
  require(lyap.dt > 0.0, "lie_derivative: dt must be positive");
  if (lyap.state_only) return on_policy_lie_derivative(lyap, state, next_state);
  const double next = lyap.value(next_state, policy.mean_action(next_state));
  return (next - lyap.value(state, action)) / lyap.dt;
}

Vector lie_derivatives(const LyapunovFunction& lyap, const buffers::Batch& batch,
                       const nn::SquashedGaussianPolicy& policy) {
  check_batch(batch, lyap);
  if (lyap.state_only) {
    return (lyap.values(batch.next_states, batch.actions) -
            lyap.values(batch.states, batch.actions)) /
           lyap.dt;
  }
  const Matrix next_actions = policy.mean_batch(batch.next_states).actions;
  return (lyap.values(batch.next_states, next_actions) -
          lyap.values(batch.states, batch.actions)) /
         lyap.dt;
}

double on_policy_lie_derivative(const LyapunovFunction& lyap, const Vector& state,
                                const Vector& next_state) {
  require(lyap.dt > 0.0, "lie_derivative: dt must be positive");
  return (lyap.value(next_state) - lyap.value(state)) / lyap.dt;
}

namespace {

// Shared hinge-risk arithmetic. `inputs` holds B current columns, B successor columns and one
// goal column, in that order.
Risk hinge_risk(const nn::DenseNet& net, const Matrix& inputs, Eigen::Index batch_size,
                double dt, double margin) {
  const nn::ForwardCache cache = net.forward_cached(inputs);
  const auto out = cache.output().row(0);
  const Eigen::Index n = batch_size;
  const double inv_n = 1.0 / static_cast<double>(n);

  Risk risk;
  Matrix cotangent = Matrix::Zero(1, inputs.cols());
  double total = 0.0;
  double total_cert = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double current = out(j);
    const double lie = (out(n + j) - current) / dt;
    const double positivity = std::max(0.0, -current);
    const double decrease = std::max(0.0, lie + margin);
    total += positivity + decrease;
    total_cert += positivity + std::max(0.0, lie + 0.0);
    if (lie > 0.0) ++risk.violations;
    double d_current = 0.0;
    if (-current > 0.0) d_current -= inv_n;
    if (lie + margin > 0.0) {
      d_current -= inv_n / dt;
      cotangent(0, n + j) = inv_n / dt;
    }
    cotangent(0, j) = d_current;
  }
  const double goal = out(2 * n);
  cotangent(0, 2 * n) = 2.0 * goal;
  risk.value = total / static_cast<double>(n) + goal * goal;
  risk.certification = total_cert / static_cast<double>(n) + goal * goal;
  risk.grad = net.backward(cache, cotangent).params;
  return risk;
}

}  // namespace

Risk lyapunov_risk(const buffers::Batch& batch, const LyapunovFunction& lyap,
                   const nn::SquashedGaussianPolicy& policy, double margin) {
  check_batch(batch, lyap);
  require(!lyap.state_only, "lyapunov_risk: needs a state-action Lyapunov function");
  const Eigen::Index n = batch.size();
  const Matrix next_actions = policy.mean_batch(batch.next_states).actions;
  const Vector goal_action = policy.mean_action(lyap.goal);

  const Eigen::Index width = lyap.net.input_size();
  const Eigen::Index sd = batch.states.rows();
  Matrix inputs(width, 2 * n + 1);
  inputs.block(0, 0, sd, n) = batch.states;
  inputs.block(sd, 0, width - sd, n) = batch.actions;
  inputs.block(0, n, sd, n) = batch.next_states;
  inputs.block(sd, n, width - sd, n) = next_actions;
  inputs.col(2 * n) << lyap.goal, goal_action;
  return hinge_risk(lyap.net, inputs, n, lyap.dt, margin);
}

Risk training_risk(const buffers::Batch& batch, const LyapunovFunction& lyap,
                   const nn::SquashedGaussianPolicy& policy) {
  return lyapunov_risk(batch, lyap, policy, lyap.mu);
}

double certification_risk(const buffers::Batch& batch, const LyapunovFunction& lyap,
                          const nn::SquashedGaussianPolicy& policy) {
  return lyapunov_risk(batch, lyap, policy, 0.0).value;
}

Risk on_policy_risk(const buffers::Batch& batch, const LyapunovFunction& lyap) {
  check_batch(batch, lyap);
  require(lyap.state_only, "on_policy_risk: needs a state-only Lyapunov function");
  const Eigen::Index n = batch.size();
  Matrix inputs(lyap.state_dim(), 2 * n + 1);
  inputs.leftCols(n) = batch.states;
  inputs.middleCols(n, n) = batch.next_states;
  inputs.col(2 * n) = lyap.goal;
  return hinge_risk(lyap.net, inputs, n, lyap.dt, 0.0);
}

double state_lyapunov(const LyapunovFunction& lyap, const nn::SquashedGaussianPolicy& policy,
                      const Vector& state, int samples, Rng& rng) {
  require(samples > 0, "state_lyapunov: need at least one sample");
  if (lyap.state_only) return lyap.value(state);
  const Matrix states = state.replicate(1, samples);
  const Matrix noise = standard_normal(policy.action_dim(), samples, rng);
  const Matrix actions = policy.sample_batch(states, noise).actions;
  return lyap.values(states, actions).mean();
}

DecreasePenalty decrease_penalty(const buffers::Batch& batch, const LyapunovFunction& lyap,
                                 const nn::SquashedGaussianPolicy& policy) {
  check_batch(batch, lyap);
  DecreasePenalty result;
  const Eigen::Index n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  if (lyap.state_only) {
    const Vector lie = lie_derivatives(lyap, batch, policy);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double h = lie(j) + lyap.mu;
      if (h > 0.0) {
        result.value += h;
        ++result.active;
      }
    }
    result.value *= inv_n;
    result.policy_grad = policy.trunk().zero_gradient();
    return result;
  }

  const auto mean = policy.mean_batch(batch.next_states);
  const Vector current = lyap.values(batch.states, batch.actions);
  const nn::ForwardCache next_cache = lyap.net.forward_cached(stack(batch.next_states, mean.actions));
  const auto next = next_cache.output().row(0);

  Matrix cotangent = Matrix::Zero(1, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = (next(j) - current(j)) / lyap.dt + lyap.mu;
    if (h > 0.0) {
      result.value += h;
      ++result.active;
      cotangent(0, j) = inv_n / lyap.dt;
    }
  }
  result.value *= inv_n;
  const Matrix d_inputs = lyap.net.backward(next_cache, cotangent).inputs;
  const Eigen::Index sd = batch.states.rows();
  result.policy_grad =
      policy.backward_mean(mean, d_inputs.bottomRows(d_inputs.rows() - sd));
  return result;
}

}  // namespace lyacert::lyapunov
