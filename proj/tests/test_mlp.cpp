#include "doctest.h"

#include <vector>

#include "densctl/mlp.hpp"
#include "oracle.hpp"

using densctl::Activation;
using densctl::Matrix;
using densctl::Mlp;

namespace {

Mlp one_one(float w, float b) {
  Mlp net({1, 1}, Activation::Identity, Activation::Identity);
  net.layers()[0].weight(0, 0) = w;
  net.layers()[0].bias[0] = b;
  return net;
}

// Finite-difference check of every parameter and input gradient of
// L = Σ_rows Σ_out c_ro · out_ro against the double-precision oracle. Steps
// that flip a relu-family unit are skipped; they must stay rare.
void check_gradients(const Mlp& net, const Matrix& batch, densctl::Rng& rng) {
  Matrix coef(batch.rows(), net.output_dim());
  for (float& v : coef.data()) v = static_cast<float>(rng.uniform() * 2 - 1);

  densctl::ForwardCache cache;
  net.forward(batch, cache);
  const auto grads = net.backward(cache, coef);
  const bool kinked = densctl::is_piecewise_linear(net.hidden_activation());

  auto loss_with = [&](const Mlp& m, const Matrix& x) {
    double acc = 0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const auto out = oracle::forward(m, oracle::row(x, r));
      for (std::size_t o = 0; o < out.size(); ++o) acc += coef(r, o) * out[o];
    }
    return acc;
  };
  auto patterns = [&](const Mlp& m, const Matrix& x) {
    std::vector<bool> all;
    if (!kinked) return all;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const auto p = oracle::pattern(m, oracle::row(x, r));
      all.insert(all.end(), p.begin(), p.end());
    }
    return all;
  };
  const auto base_pattern = patterns(net, batch);

  const double h = 1e-3;
  double worst = 0;
  std::size_t checked = 0, skipped = 0;
  // Perturbs *slot by ±h on the float storage and compares against analytic.
  auto probe_slot = [&](float* slot, const Mlp& m, const Matrix& x, double analytic) {
    const float keep = *slot;
    *slot = keep + static_cast<float>(h);
    const double up = loss_with(m, x);
    const bool flip_up = patterns(m, x) != base_pattern;
    *slot = keep - static_cast<float>(h);
    const double down = loss_with(m, x);
    const bool flip_down = patterns(m, x) != base_pattern;
    *slot = keep;
    if (flip_up || flip_down) {
      ++skipped;
      return;
    }
    ++checked;
    worst = std::max(worst, oracle::rel_err(analytic, (up - down) / (2 * h), 1e-2));
  };

  Mlp probe = net;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    auto w = probe.layers()[l].weight.data();
    for (std::size_t i = 0; i < w.size(); ++i) probe_slot(&w[i], probe, batch, grads.weight[l].data()[i]);
    auto& b = probe.layers()[l].bias;
    for (std::size_t i = 0; i < b.size(); ++i) probe_slot(&b[i], probe, batch, grads.bias[l][i]);
  }
  Matrix x = batch;
  for (std::size_t i = 0; i < x.size(); ++i) probe_slot(&x.data()[i], net, x, grads.input.data()[i]);

  CHECK(worst < 1e-2);
  CHECK(static_cast<double>(skipped) <= 0.05 * static_cast<double>(checked + skipped));
}

}  // namespace

TEST_CASE("forward: zero-weight net outputs zeros") {
  Mlp net({3, 5, 2}, Activation::Tanh, Activation::Identity);
  const Matrix out = net.predict(Matrix(4, 3, 1.5f));
  CHECK(out == Matrix(4, 2, 0.0f));
}

TEST_CASE("forward: 1-1 net with w=2, b=1 maps 3 to 7") {
  const Mlp net = one_one(2, 1);
  CHECK(net.predict(oracle::column({3}))(0, 0) == 7.0f);
}

TEST_CASE("forward: random 4-8-8-1 net on 16 rows gives a finite 16x1 output") {
  densctl::Rng rng(1);
  const Mlp net = Mlp::random({4, 8, 8, 1}, Activation::LeakyRelu, Activation::Identity, rng);
  Matrix batch(16, 4);
  for (float& v : batch.data()) v = static_cast<float>(rng.normal());
  densctl::ForwardCache cache;
  const Matrix out = net.forward(batch, cache);
  CHECK(out.rows() == 16);
  CHECK(out.cols() == 1);
  CHECK(out.all_finite());
  CHECK(out == net.predict(batch));
  CHECK(net.parameter_count() == 4 * 8 + 8 + 8 * 8 + 8 + 8 + 1);
}

TEST_CASE("forward rejects wrong input width") {
  const Mlp net({2, 3, 1}, Activation::Relu, Activation::Identity);
  CHECK_THROWS_AS(net.predict(Matrix(1, 3)), densctl::Error);
}

TEST_CASE("backward: hand chain rule on the 1-1 net") {
  const Mlp net = one_one(2, 1);
  densctl::ForwardCache cache;
  net.forward(oracle::column({3}), cache);
  const auto g = net.backward(cache, oracle::column({1}));
  CHECK(g.weight[0](0, 0) == 3.0f);
  CHECK(g.bias[0][0] == 1.0f);
  CHECK(g.input(0, 0) == 2.0f);
}

TEST_CASE("backward: zero loss gradient gives zero gradients") {
  densctl::Rng rng(2);
  const Mlp net = Mlp::random({3, 6, 2}, Activation::Tanh, Activation::Tanh, rng);
  Matrix x(5, 3);
  for (float& v : x.data()) v = static_cast<float>(rng.normal());
  densctl::ForwardCache cache;
  net.forward(x, cache);
  const auto g = net.backward(cache, Matrix(5, 2));
  for (const auto& w : g.weight) CHECK(w == Matrix(w.rows(), w.cols()));
  for (const auto& b : g.bias) {
    for (float v : b) CHECK(v == 0.0f);
  }
  CHECK(g.input == Matrix(5, 3));
}

TEST_CASE("backward errors: no cache, wrong shape") {
  const Mlp net({2, 2}, Activation::Identity, Activation::Identity);
  densctl::ForwardCache empty;
  CHECK_THROWS_AS(net.backward(empty, Matrix(1, 2)), densctl::Error);
  densctl::ForwardCache cache;
  net.forward(Matrix(3, 2), cache);
  CHECK_THROWS_AS(net.backward(cache, Matrix(2, 2)), densctl::Error);
}

TEST_CASE("gradient check against finite differences for every activation mix") {
  densctl::Rng rng(11);
  const std::vector<std::pair<Activation, Activation>> configs = {
      {Activation::Tanh, Activation::Identity},
      {Activation::Tanh, Activation::Tanh},
      {Activation::LeakyRelu, Activation::Identity},
      {Activation::Relu, Activation::Identity},
  };
  for (const auto& [hidden, out] : configs) {
    CAPTURE(densctl::to_string(hidden));
    const Mlp net = Mlp::random({3, 7, 5, 2}, hidden, out, rng);
    Matrix batch(4, 3);
    for (float& v : batch.data()) v = static_cast<float>(rng.normal());
    check_gradients(net, batch, rng);
  }
}

TEST_CASE("gradient check on the repo's architectures") {
  densctl::Rng rng(12);
  // density regressor (2-D features), toy generator, toy discriminator
  const std::vector<Mlp> nets = {
      Mlp::random({2, 64, 64, 64, 1}, Activation::LeakyRelu, Activation::Identity, rng),
      Mlp::random({2, 64, 64, 2}, Activation::LeakyRelu, Activation::Identity, rng),
      Mlp::random({2, 64, 64, 1}, Activation::LeakyRelu, Activation::Identity, rng),
  };
  for (const auto& net : nets) {
    Matrix batch(2, net.input_dim());
    for (float& v : batch.data()) v = static_cast<float>(rng.normal());
    check_gradients(net, batch, rng);
  }
}
