#include "lyacert/nn/dense_net.hpp"

#include <cmath>

namespace lyacert::nn {

namespace {

void apply_activation(Matrix& z, Activation activation) {
  switch (activation) {
    case Activation::identity:
      break;
    case Activation::tanh:
      // Same values as std::tanh to within a few ulp, but vectorized through exp.
      z = (1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0)).matrix();
      break;
    case Activation::relu:
      z = z.cwiseMax(0.0);
      break;
  }
}

// Multiplies the cotangent in place by f'(z), expressed through the post-activation a = f(z).
void scale_by_derivative(Matrix& cotangent, const Matrix& post, Activation activation) {
  switch (activation) {
    case Activation::identity:
      break;
    case Activation::tanh:
      cotangent.array() *= 1.0 - post.array().square();
      break;
    case Activation::relu:
      cotangent.array() *= (post.array() > 0.0).cast<double>();
      break;
  }
}

template <typename Fn>
decltype(auto) locate(std::vector<Matrix>& weights, std::vector<Vector>& biases,
                      std::size_t flat_index, Fn&& fn) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto w = static_cast<std::size_t>(weights[l].size());
    if (flat_index < w) return fn(weights[l].data()[flat_index]);
    flat_index -= w;
    const auto b = static_cast<std::size_t>(biases[l].size());
    if (flat_index < b) return fn(biases[l].data()[flat_index]);
    flat_index -= b;
  }
  throw ContractViolation("parameter index out of range");
}

}  // namespace

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::identity:
      return "identity";
    case Activation::tanh:
      return "tanh";
    case Activation::relu:
      return "relu";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw ContractViolation("unknown activation '" + std::string(name) + "'");
}

std::size_t Gradient::size() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  return n;
}

double& Gradient::operator[](std::size_t flat_index) {
  return locate(weights, biases, flat_index, [](double& x) -> double& { return x; });
}

double Gradient::operator[](std::size_t flat_index) const {
  return const_cast<Gradient&>(*this)[flat_index];
}

Gradient& Gradient::operator+=(const Gradient& other) {
  require(other.weights.size() == weights.size(), "gradient layer count mismatch");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

Gradient& Gradient::operator*=(double factor) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] *= factor;
    biases[l] *= factor;
  }
  return *this;
}

double Gradient::squared_norm() const {
  double total = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    total += weights[l].squaredNorm() + biases[l].squaredNorm();
  return total;
}

bool Gradient::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l)
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  return true;
}

DenseNet::DenseNet(std::vector<int> layer_sizes, Activation hidden, Activation output)
    : layer_sizes_(std::move(layer_sizes)), hidden_(hidden), output_(output) {
  require(layer_sizes_.size() >= 2, "DenseNet needs at least an input and an output layer");
  for (int n : layer_sizes_) require(n > 0, "DenseNet layer sizes must be positive");
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    weights_.push_back(Matrix::Zero(layer_sizes_[l + 1], layer_sizes_[l]));
    biases_.push_back(Vector::Zero(layer_sizes_[l + 1]));
  }
}

DenseNet DenseNet::random(std::vector<int> layer_sizes, Activation hidden, Activation output,
                          Rng& rng) {
  DenseNet net(std::move(layer_sizes), hidden, output);
  for (auto& w : net.weights_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    w = uniform(w.rows(), w.cols(), -bound, bound, rng);
  }
  return net;
}

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l)
    n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  return n;
}

double& DenseNet::parameter(std::size_t flat_index) {
  return locate(weights_, biases_, flat_index, [](double& x) -> double& { return x; });
}

double DenseNet::parameter(std::size_t flat_index) const {
  return const_cast<DenseNet&>(*this).parameter(flat_index);
}

bool DenseNet::all_finite() const {
  for (std::size_t l = 0; l < weights_.size(); ++l)
    if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
  return true;
}

Vector DenseNet::forward(const Vector& input) const {
  require(input.size() == input_size(), "DenseNet::forward: input dimension mismatch");
  Matrix a = input;
  return forward(a).col(0);
}

Matrix DenseNet::forward(const Matrix& inputs) const {
  require(inputs.rows() == input_size(), "DenseNet::forward: input dimension mismatch");
  Matrix a = inputs;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix z = weights_[l] * a;
    z.colwise() += biases_[l];
    apply_activation(z, activation_of(l));
    a = std::move(z);
  }
  return a;
}

ForwardCache DenseNet::forward_cached(const Matrix& inputs) const {
  require(inputs.rows() == input_size(), "DenseNet::forward: input dimension mismatch");
  ForwardCache cache;
  cache.activations.reserve(weights_.size() + 1);
  cache.activations.push_back(inputs);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix z = weights_[l] * cache.activations.back();
    z.colwise() += biases_[l];
    apply_activation(z, activation_of(l));
    cache.activations.push_back(std::move(z));
  }
  return cache;
}

DenseNet::Backward DenseNet::backward(const ForwardCache& cache,
                                      const Matrix& output_cotangent) const {
  require(cache.activations.size() == weights_.size() + 1, "DenseNet::backward: stale cache");
  require(output_cotangent.rows() == output_size() &&
              output_cotangent.cols() == cache.output().cols(),
          "DenseNet::backward: cotangent shape mismatch");
  Backward result;
  result.params.weights.resize(weights_.size());
  result.params.biases.resize(weights_.size());

  Matrix delta = output_cotangent;
  for (std::size_t l = weights_.size(); l-- > 0;) {
    scale_by_derivative(delta, cache.activations[l + 1], activation_of(l));
    result.params.weights[l].noalias() = delta * cache.activations[l].transpose();
    result.params.biases[l] = delta.rowwise().sum();
    Matrix upstream = weights_[l].transpose() * delta;
    delta = std::move(upstream);
  }
  result.inputs = std::move(delta);
  return result;
}

std::pair<Gradient, Vector> DenseNet::backward(const Vector& input,
                                               const Vector& output_cotangent) const {
  require(input.size() == input_size(), "DenseNet::backward: input dimension mismatch");
  require(output_cotangent.size() == output_size(),
          "DenseNet::backward: cotangent dimension mismatch");
  const ForwardCache cache = forward_cached(Matrix(input));
  Backward b = backward(cache, Matrix(output_cotangent));
  return {std::move(b.params), b.inputs.col(0)};
}

Gradient DenseNet::zero_gradient() const {
  Gradient g;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    g.weights.push_back(Matrix::Zero(weights_[l].rows(), weights_[l].cols()));
    g.biases.push_back(Vector::Zero(biases_[l].size()));
  }
  return g;
}

void polyak_update(DenseNet& target, const DenseNet& source, double tau) {
  require(target.layer_sizes() == source.layer_sizes(), "polyak_update: layer size mismatch");
  require(tau >= 0.0 && tau <= 1.0, "polyak_update: tau must lie in [0, 1]");
  for (std::size_t l = 0; l < target.num_layers(); ++l) {
    target.weights()[l] = tau * source.weights()[l] + (1.0 - tau) * target.weights()[l];
    target.biases()[l] = tau * source.biases()[l] + (1.0 - tau) * target.biases()[l];
  }
}

double clip_global_norm(Gradient& grad, double max_norm) {
  const double norm = std::sqrt(grad.squared_norm());
  if (max_norm > 0.0 && norm > max_norm) grad *= max_norm / (norm + 1e-6);
  return norm;
}

}  // namespace lyacert::nn
