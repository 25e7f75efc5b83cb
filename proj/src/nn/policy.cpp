#include "lyacert/nn/policy.hpp"

#include <cmath>
#include <numbers>

namespace lyacert::nn {

namespace {

constexpr double kHalfLogTwoPi = 0.91893853320467274178;  // 0.5 * log(2 pi)

// log(1 - tanh(u)^2) = 2 * (log 2 - u - softplus(-2u)), stable for large |u|.
Matrix log_one_minus_tanh_sq(const Matrix& u) {
  const Eigen::ArrayXXd x = -2.0 * u.array();
  const Eigen::ArrayXXd softplus = x.max(0.0) + (-x.abs()).exp().log1p();
  return (2.0 * (std::numbers::ln2 - u.array() - softplus)).matrix();
}

}  // namespace

SquashedGaussianPolicy::SquashedGaussianPolicy(DenseNet trunk, Vector action_scale,
                                               Vector action_bias, double log_std_min,
                                               double log_std_max)
    : trunk_(std::move(trunk)),
      action_scale_(std::move(action_scale)),
      action_bias_(std::move(action_bias)),
      log_std_min_(log_std_min),
      log_std_max_(log_std_max) {
  require(action_scale_.size() == action_bias_.size(), "policy: scale/bias size mismatch");
  require(trunk_.output_size() == 2 * action_scale_.size(),
          "policy: trunk must output 2 * action_dim values");
  require((action_scale_.array() > 0.0).all(), "policy: action scale must be positive");
  require(log_std_min_ < log_std_max_, "policy: empty log-std range");
}

SquashedGaussianPolicy SquashedGaussianPolicy::random(int state_dim, const Vector& action_low,
                                                      const Vector& action_high,
                                                      const std::vector<int>& hidden,
                                                      Activation hidden_activation, Rng& rng) {
  require(action_low.size() == action_high.size(), "policy: bound size mismatch");
  std::vector<int> sizes{state_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(2 * static_cast<int>(action_low.size()));
  DenseNet trunk = DenseNet::random(sizes, hidden_activation, Activation::identity, rng);
  return SquashedGaussianPolicy(std::move(trunk), 0.5 * (action_high - action_low),
                                0.5 * (action_high + action_low));
}

SquashedGaussianPolicy::HeadPass SquashedGaussianPolicy::head(const Matrix& states) const {
  require(states.rows() == state_dim(), "policy: state dimension mismatch");
  HeadPass h;
  h.trunk = trunk_.forward_cached(states);
  const Eigen::Index m = action_dim();
  const Matrix& out = h.trunk.output();
  h.mean = out.topRows(m);
  const Matrix raw = out.bottomRows(m);
  h.log_std = raw.cwiseMax(log_std_min_).cwiseMin(log_std_max_);
  h.log_std_open =
      ((raw.array() > log_std_min_) && (raw.array() < log_std_max_)).cast<double>().matrix();
  h.std = h.log_std.array().exp().matrix();
  return h;
}

Matrix SquashedGaussianPolicy::squash(const Matrix& pre_tanh) const {
  Matrix a = pre_tanh.array().tanh().matrix();
  a = action_scale_.asDiagonal() * a;
  a.colwise() += action_bias_;
  return a;
}

// Per-sample sum over dimensions of log |da/du| = log(scale) + log(1 - tanh(u)^2).
Vector SquashedGaussianPolicy::log_jacobian(const Matrix& pre_tanh) const {
  const double log_scale = action_scale_.array().log().sum();
  return (log_one_minus_tanh_sq(pre_tanh).colwise().sum().array() + log_scale).matrix().transpose();
}

SquashedGaussianPolicy::Sample SquashedGaussianPolicy::sample(const Vector& state,
                                                              const Vector& noise) const {
  require(noise.size() == action_dim(), "policy: noise dimension mismatch");
  SampleBatch b = sample_batch(Matrix(state), Matrix(noise));
  return Sample{b.actions.col(0), b.pre_tanh.col(0), b.log_probs(0)};
}

Vector SquashedGaussianPolicy::mean_action(const Vector& state) const {
  require(state.size() == state_dim(), "policy: state dimension mismatch");
  const Matrix out = trunk_.forward(Matrix(state));
  return squash(out.topRows(action_dim())).col(0);
}

SquashedGaussianPolicy::SampleBatch SquashedGaussianPolicy::sample_batch(
    const Matrix& states, const Matrix& noise) const {
  require(noise.rows() == action_dim() && noise.cols() == states.cols(),
          "policy: noise shape mismatch");
  SampleBatch b;
  b.head = head(states);
  b.noise = noise;
  b.pre_tanh = b.head.mean + b.head.std.cwiseProduct(noise);
  b.actions = squash(b.pre_tanh);
  const Eigen::Index m = action_dim();
  const Vector gaussian = (-0.5 * noise.array().square() - b.head.log_std.array())
                              .matrix()
                              .colwise()
                              .sum()
                              .transpose()
                              .array() -
                          static_cast<double>(m) * kHalfLogTwoPi;
  b.log_probs = gaussian - log_jacobian(b.pre_tanh);
  return b;
}

SquashedGaussianPolicy::MeanBatch SquashedGaussianPolicy::mean_batch(const Matrix& states) const {
  MeanBatch b;
  b.head = head(states);
  b.actions = squash(b.head.mean);
  return b;
}

SquashedGaussianPolicy::LogProbBatch SquashedGaussianPolicy::log_prob_batch(
    const Matrix& states, const Matrix& pre_tanh) const {
  require(pre_tanh.rows() == action_dim() && pre_tanh.cols() == states.cols(),
          "policy: pre-squash action shape mismatch");
  LogProbBatch b;
  b.head = head(states);
  b.pre_tanh = pre_tanh;
  const Eigen::Index m = action_dim();
  const Eigen::ArrayXXd z = (pre_tanh - b.head.mean).array() / b.head.std.array();
  const Vector gaussian =
      (-0.5 * z.square() - b.head.log_std.array()).matrix().colwise().sum().transpose().array() -
      static_cast<double>(m) * kHalfLogTwoPi;
  b.log_probs = gaussian - log_jacobian(pre_tanh);
  return b;
}

Gradient SquashedGaussianPolicy::backward_head(const HeadPass& h, const Matrix& d_mean,
                                               const Matrix& d_log_std) const {
  const Eigen::Index m = action_dim();
  Matrix cotangent(2 * m, d_mean.cols());
  cotangent.topRows(m) = d_mean;
  cotangent.bottomRows(m) = d_log_std.cwiseProduct(h.log_std_open);
  return trunk_.backward(h.trunk, cotangent).params;
}

Gradient SquashedGaussianPolicy::backward_sample(const SampleBatch& b, const Matrix& d_actions,
                                                 const Vector& d_log_probs) const {
  require(d_actions.rows() == action_dim() && d_actions.cols() == b.actions.cols() &&
              d_log_probs.size() == b.actions.cols(),
          "policy: cotangent shape mismatch");
  const Eigen::ArrayXXd t = b.pre_tanh.array().tanh();
  // d log_prob / d u = 2 tanh(u); d a / d u = scale * (1 - tanh(u)^2)
  Eigen::ArrayXXd d_u = (action_scale_.asDiagonal() * d_actions).array() * (1.0 - t.square());
  d_u += 2.0 * (t.rowwise() * d_log_probs.transpose().array());
  Matrix d_log_std = (d_u * b.head.std.array() * b.noise.array()).matrix();
  d_log_std.rowwise() -= d_log_probs.transpose();
  return backward_head(b.head, d_u.matrix(), d_log_std);
}

Gradient SquashedGaussianPolicy::backward_mean(const MeanBatch& b, const Matrix& d_actions) const {
  require(d_actions.rows() == action_dim() && d_actions.cols() == b.actions.cols(),
          "policy: cotangent shape mismatch");
  const Eigen::ArrayXXd t = b.head.mean.array().tanh();
  const Matrix d_mean =
      ((action_scale_.asDiagonal() * d_actions).array() * (1.0 - t.square())).matrix();
  return backward_head(b.head, d_mean, Matrix::Zero(d_mean.rows(), d_mean.cols()));
}

Gradient SquashedGaussianPolicy::backward_log_prob(const LogProbBatch& b,
                                                   const Vector& d_log_probs) const {
  require(d_log_probs.size() == b.pre_tanh.cols(), "policy: cotangent shape mismatch");
  const Eigen::ArrayXXd z = (b.pre_tanh - b.head.mean).array() / b.head.std.array();
  const Eigen::ArrayXXd weight = d_log_probs.transpose().replicate(z.rows(), 1).array();
  const Matrix d_mean = (weight * z / b.head.std.array()).matrix();
  const Matrix d_log_std = (weight * (z.square() - 1.0)).matrix();
  return backward_head(b.head, d_mean, d_log_std);
}

}  // namespace lyacert::nn
