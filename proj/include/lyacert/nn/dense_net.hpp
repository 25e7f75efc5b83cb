#pragma once

#include "lyacert/common.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace lyacert::nn {

enum class Activation { identity, tanh, relu };

std::string_view to_string(Activation activation);
Activation activation_from_string(std::string_view name);

/// Parameter-shaped container; used for gradients and optimizer moments.
struct Gradient {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  std::size_t size() const;
  double& operator[](std::size_t flat_index);
  double operator[](std::size_t flat_index) const;

  Gradient& operator+=(const Gradient& other);
  Gradient& operator*=(double factor);
  double squared_norm() const;
  bool all_finite() const;
};

/// Activations recorded by a batched forward pass; column j is sample j.
struct ForwardCache {
  std::vector<Matrix> activations;  // activations[0] is the input, back() the output

  const Matrix& output() const { return activations.back(); }
};

/// Fully connected network y = f_L(W_L ... f_1(W_1 x + b_1) ... + b_L).
class DenseNet {
 public:
  DenseNet() = default;

  /// Zero-initialized network.
  DenseNet(std::vector<int> layer_sizes, Activation hidden, Activation output);

  /// Weights uniform in +-1/sqrt(fan_in), biases zero.
  static DenseNet random(std::vector<int> layer_sizes, Activation hidden, Activation output,
                         Rng& rng);

  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  int input_size() const { return layer_sizes_.front(); }
  int output_size() const { return layer_sizes_.back(); }
  std::size_t num_layers() const { return weights_.size(); }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }

  std::vector<Matrix>& weights() { return weights_; }
  const std::vector<Matrix>& weights() const { return weights_; }
  std::vector<Vector>& biases() { return biases_; }
  const std::vector<Vector>& biases() const { return biases_; }

  std::size_t parameter_count() const;
  double& parameter(std::size_t flat_index);
  double parameter(std::size_t flat_index) const;
  bool all_finite() const;

  Vector forward(const Vector& input) const;
  Matrix forward(const Matrix& inputs) const;
  ForwardCache forward_cached(const Matrix& inputs) const;

  struct Backward {
    Gradient params;
    Matrix inputs;  // d(objective)/d(input), same shape as the forward inputs
  };

  /// Reverse pass for a cached batch. Parameter gradients are summed over columns.
  Backward backward(const ForwardCache& cache, const Matrix& output_cotangent) const;

  /// Single-sample reverse pass.
  std::pair<Gradient, Vector> backward(const Vector& input, const Vector& output_cotangent) const;

  Gradient zero_gradient() const;

 private:
  Activation activation_of(std::size_t layer) const {
    return layer + 1 == weights_.size() ? output_ : hidden_;
  }

  std::vector<int> layer_sizes_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
  Activation hidden_ = Activation::tanh;
  Activation output_ = Activation::identity;
};

/// target <- tau * source + (1 - tau) * target, elementwise over all parameters.
void polyak_update(DenseNet& target, const DenseNet& source, double tau);

/// Rescales gradients in place so their joint L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_global_norm(Gradient& grad, double max_norm);

}  // namespace lyacert::nn
