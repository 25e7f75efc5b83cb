#include <doctest.h>

#include "checks.hpp"
#include "lyacert/nn/adam.hpp"
#include "lyacert/nn/checkpoint.hpp"
#include "lyacert/nn/dense_net.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace lyacert;
using lyacert::nn::Activation;
using lyacert::nn::DenseNet;

TEST_CASE("dense net forward matches a hand evaluation") {
  DenseNet net({2, 2, 1}, Activation::tanh, Activation::identity);
  net.weights()[0] << 0.5, -1.0, 0.25, 2.0;
  net.biases()[0] << 0.1, -0.2;
  net.weights()[1] << 1.5, -0.5;
  net.biases()[1] << 0.3;
  const Vector x{{0.4, -0.3}};
  const double h0 = std::tanh(0.5 * 0.4 + -1.0 * -0.3 + 0.1);
  const double h1 = std::tanh(0.25 * 0.4 + 2.0 * -0.3 - 0.2);
  CHECK(net.forward(x)(0) == doctest::Approx(1.5 * h0 - 0.5 * h1 + 0.3).epsilon(1e-14));
}

TEST_CASE("dense net backward agrees with finite differences") {
  Rng rng(3);
  for (Activation act : {Activation::tanh, Activation::identity}) {
    DenseNet net = DenseNet::random({3, 5, 4, 2}, act, Activation::identity, rng);
    const Matrix x = standard_normal(3, 7, rng);
    const Matrix c = standard_normal(2, 7, rng);
    const auto cache = net.forward_cached(x);
    const auto back = net.backward(cache, c);
    const nn::Gradient numeric = testing::numeric_gradient(
        net, [&] { return (net.forward(x).array() * c.array()).sum(); });
    CHECK(testing::max_relative_error(back.params, numeric) < 1e-6);

    Matrix xp = x;
    const double h = 1e-6;
    xp(1, 2) += h;
    Matrix xm = x;
    xm(1, 2) -= h;
    const double fd = ((net.forward(xp).array() - net.forward(xm).array()) * c.array()).sum() / (2 * h);
    CHECK(back.inputs(1, 2) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("single-sample backward equals the batched one") {
  Rng rng(4);
  DenseNet net = DenseNet::random({3, 6, 1}, Activation::relu, Activation::identity, rng);
  const Vector x = standard_normal(3, 1, rng).col(0);
  const auto [grad, dx] = net.backward(x, Vector::Ones(1));
  const auto batched = net.backward(net.forward_cached(x), Matrix::Ones(1, 1));
  CHECK(testing::max_relative_error(grad, batched.params) == 0.0);
  CHECK((dx - batched.inputs.col(0)).norm() == 0.0);
}

TEST_CASE("polyak update endpoints") {
  Rng rng(5);
  const DenseNet source = DenseNet::random({2, 3, 1}, Activation::tanh, Activation::identity, rng);
  DenseNet target = DenseNet::random({2, 3, 1}, Activation::tanh, Activation::identity, rng);
  const DenseNet before = target;
  nn::polyak_update(target, source, 0.0);
  for (std::size_t i = 0; i < target.parameter_count(); ++i) CHECK(target.parameter(i) == before.parameter(i));
  nn::polyak_update(target, source, 1.0);
  for (std::size_t i = 0; i < target.parameter_count(); ++i) CHECK(target.parameter(i) == source.parameter(i));
  CHECK_THROWS_AS(nn::polyak_update(target, source, 1.5), ContractViolation);
}

TEST_CASE("global norm clipping") {
  DenseNet net({1, 1}, Activation::identity, Activation::identity);
  nn::Gradient g = net.zero_gradient();
  g.weights[0](0, 0) = 3.0;
  g.biases[0](0) = 4.0;
  CHECK(nn::clip_global_norm(g, 1.0) == doctest::Approx(5.0));
  CHECK(g.weights[0](0, 0) == doctest::Approx(0.6));
  CHECK(g.biases[0](0) == doctest::Approx(0.8));
  nn::clip_global_norm(g, 10.0);
  CHECK(g.biases[0](0) == doctest::Approx(0.8));
}

TEST_CASE("Adam two-step trace and non-finite rejection") {
  const testing::Outcome out = [] {
    testing::Outcome o;
    DenseNet net({1, 1}, Activation::identity, Activation::identity);
    net.weights()[0](0, 0) = 1.0;
    nn::AdamConfig cfg;
    cfg.learning_rate = 0.1;
    nn::AdamState state(net, cfg);
    nn::Gradient g = net.zero_gradient();
    g.weights[0](0, 0) = 2.0;
    nn::adam_step(net, g, state);
    // First bias-corrected step moves each parameter by lr * sign(g) up to epsilon.
    o.check(std::abs(net.weights()[0](0, 0) - (1.0 - 0.1 * 2.0 / (2.0 + 1e-8))) < 1e-15, "first step");
    o.check(net.biases()[0](0) == 0.0, "zero gradient leaves the bias");
    return o;
  }();
  CHECK(out.pass());

  DenseNet net({1, 1}, Activation::identity, Activation::identity);
  nn::AdamState state(net, {});
  nn::Gradient bad = net.zero_gradient();
  bad.weights[0](0, 0) = std::nan("");
  CHECK_THROWS_AS(nn::adam_step(net, bad, state), NumericalError);
  CHECK(net.weights()[0](0, 0) == 0.0);
  CHECK(state.step_count == 0);
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(6);
  nn::Checkpoint ckpt;
  ckpt.nets["a"] = DenseNet::random({3, 4, 2}, Activation::tanh, Activation::identity, rng);
  ckpt.nets["b"] = DenseNet::random({2, 1}, Activation::relu, Activation::tanh, rng);
  ckpt.meta["step"] = 12;
  const auto path = std::filesystem::temp_directory_path() / "lyacert_ckpt_test.json";
  nn::save_checkpoint(path, ckpt);
  const nn::Checkpoint back = nn::load_checkpoint(path);
  REQUIRE(back.nets.size() == 2);
  for (const auto& [name, net] : ckpt.nets) {
    const DenseNet& other = back.at(name);
    CHECK(other.layer_sizes() == net.layer_sizes());
    CHECK(other.hidden_activation() == net.hidden_activation());
    CHECK(other.output_activation() == net.output_activation());
    for (std::size_t i = 0; i < net.parameter_count(); ++i) CHECK(other.parameter(i) == net.parameter(i));
  }
  CHECK(back.meta["step"] == 12);

  std::ofstream(path) << "{\"nets\": {\"a\": 5}";
  CHECK_THROWS_AS(nn::load_checkpoint(path), std::runtime_error);
  CHECK_THROWS_AS(nn::load_checkpoint(path.string() + ".missing"), std::runtime_error);
  std::filesystem::remove(path);
}
