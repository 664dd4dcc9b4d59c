#include "densctl/mlp.hpp"

#include <cmath>
#include <string>

#include "densctl/kernels.hpp"

namespace densctl {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::LeakyRelu: return "leaky-relu";
  }
  return "?";
}

Activation activation_from_string(std::string_view name) {
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "leaky-relu") return Activation::LeakyRelu;
  fail(ErrorKind::InvalidArgument, "unknown activation '" + std::string(name) + "'");
}

bool is_piecewise_linear(Activation a) { return a != Activation::Tanh; }

void apply_activation(Activation a, std::span<float> values) {
  switch (a) {
    case Activation::Identity: return;
    case Activation::Tanh:
      for (float& v : values) v = std::tanh(v);
      return;
    case Activation::Relu:
      for (float& v : values) v = v > 0.0f ? v : 0.0f;
      return;
    case Activation::LeakyRelu:
      for (float& v : values) v = v > 0.0f ? v : kLeakySlope * v;
      return;
  }
}

void apply_activation_grad(Activation a, std::span<const float> pre, std::span<float> grad) {
  switch (a) {
    case Activation::Identity: return;
    case Activation::Tanh:
      for (std::size_t i = 0; i < grad.size(); ++i) {
        const float t = std::tanh(pre[i]);
        grad[i] *= 1.0f - t * t;
      }
      return;
    case Activation::Relu:
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = pre[i] > 0.0f ? grad[i] : 0.0f;
      return;
    case Activation::LeakyRelu:
      for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!(pre[i] > 0.0f)) grad[i] *= kLeakySlope;
      }
      return;
  }
}

bool Gradients::all_finite() const {
  for (const auto& w : weight) {
    if (!w.all_finite()) return false;
  }
  for (const auto& b : bias) {
    for (float v : b) {
      if (!std::isfinite(v)) return false;
    }
  }
  return input.all_finite();
}

void Gradients::add_scaled(const Gradients& other, float scale) {
  require(weight.size() == other.weight.size(), ErrorKind::DimensionMismatch,
          "gradient layer counts differ");
  for (std::size_t l = 0; l < weight.size(); ++l) {
    require_same_shape(weight[l], other.weight[l], "gradient add");
    auto dst = weight[l].data();
    auto src = other.weight[l].data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
    for (std::size_t i = 0; i < bias[l].size(); ++i) bias[l][i] += scale * other.bias[l][i];
  }
}

Mlp::Mlp(std::vector<std::size_t> layer_sizes, Activation hidden, Activation output)
    : sizes_(std::move(layer_sizes)), hidden_(hidden), output_(output) {
  require(sizes_.size() >= 2, ErrorKind::InvalidArgument, "mlp needs at least input and output sizes");
  for (std::size_t s : sizes_) require(s >= 1, ErrorKind::InvalidArgument, "mlp layer size must be >= 1");
  layers_.reserve(sizes_.size() - 1);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    layers_.push_back({Matrix(sizes_[l], sizes_[l + 1]), std::vector<float>(sizes_[l + 1], 0.0f)});
  }
}

Mlp Mlp::random(std::vector<std::size_t> layer_sizes, Activation hidden, Activation output,
                Rng& rng) {
  Mlp net(std::move(layer_sizes), hidden, output);
  for (std::size_t l = 0; l < net.layers_.size(); ++l) {
    auto& w = net.layers_[l].weight;
    const double fan_in = static_cast<double>(w.rows());
    const double fan_out = static_cast<double>(w.cols());
    const bool relu_family = net.activation_of(l) == Activation::Relu ||
                             net.activation_of(l) == Activation::LeakyRelu;
    const double limit = relu_family ? std::sqrt(6.0 / fan_in) : std::sqrt(6.0 / (fan_in + fan_out));
    for (float& v : w.data()) v = static_cast<float>((2.0 * rng.uniform() - 1.0) * limit);
  }
  return net;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

void Mlp::check_input(const Matrix& batch) const {
  require(!layers_.empty(), ErrorKind::State, "mlp has no layers");
  if (batch.cols() != input_dim()) {
    fail(ErrorKind::DimensionMismatch,
         "mlp input width " + std::to_string(batch.cols()) + " != " + std::to_string(input_dim()));
  }
}

Matrix Mlp::forward(const Matrix& batch, ForwardCache& cache) const {
  check_input(batch);
  cache.clear();
  Matrix x = batch;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix pre = kernels::omp::affine(x, layers_[l].weight, layers_[l].bias);
    Matrix post = pre;
    apply_activation(activation_of(l), post.data());
    cache.inputs.push_back(std::move(x));
    cache.preactivations.push_back(std::move(pre));
    x = std::move(post);
  }
  require(x.all_finite(), ErrorKind::NonFinite, "mlp forward produced non-finite output");
  return x;
}

Matrix Mlp::predict(const Matrix& batch) const {
  check_input(batch);
  Matrix x = batch;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    x = kernels::omp::affine(x, layers_[l].weight, layers_[l].bias);
    apply_activation(activation_of(l), x.data());
  }
  require(x.all_finite(), ErrorKind::NonFinite, "mlp forward produced non-finite output");
  return x;
}

Gradients Mlp::backward(const ForwardCache& cache, const Matrix& loss_grad) const {
  require(cache.valid() && cache.inputs.size() == layers_.size(), ErrorKind::State,
          "mlp backward called without a cached forward pass");
  const std::size_t batch = cache.inputs.front().rows();
  require(loss_grad.rows() == batch && loss_grad.cols() == output_dim(),
          ErrorKind::DimensionMismatch, "loss gradient shape does not match network output");

  Gradients grads;
  grads.weight.resize(layers_.size());
  grads.bias.resize(layers_.size());
  Matrix delta = loss_grad;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    apply_activation_grad(activation_of(l), cache.preactivations[l].data(), delta.data());
    grads.weight[l] = matmul_tn(cache.inputs[l], delta);
    std::vector<double> bias_acc(delta.cols(), 0.0);
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      auto row = delta.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) bias_acc[j] += row[j];
    }
    grads.bias[l].assign(bias_acc.begin(), bias_acc.end());
    delta = matmul_nt(delta, layers_[l].weight);
  }
  grads.input = std::move(delta);
  return grads;
}

Gradients Mlp::zero_gradients() const {
  Gradients g;
  for (const auto& layer : layers_) {
    g.weight.emplace_back(layer.weight.rows(), layer.weight.cols());
    g.bias.emplace_back(layer.bias.size(), 0.0f);
  }
  return g;
}

}  // namespace densctl
