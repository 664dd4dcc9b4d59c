#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "densctl/matrix.hpp"
#include "densctl/rng.hpp"

namespace densctl {

/// Codes are part of the MLPW1 checkpoint format; do not renumber.
enum class Activation : std::uint8_t {
  Identity = 0,
  Tanh = 1,
  Relu = 2,
  LeakyRelu = 3,
};

inline constexpr float kLeakySlope = 0.2f;

const char* to_string(Activation a);
Activation activation_from_string(std::string_view name);
bool is_piecewise_linear(Activation a);

struct DenseLayer {
  Matrix weight;             // in × out
  std::vector<float> bias;   // out

  bool operator==(const DenseLayer&) const = default;
};

/// Activations recorded by a forward pass, consumed by backward.
struct ForwardCache {
  std::vector<Matrix> inputs;          // input to each layer
  std::vector<Matrix> preactivations;  // x·W + b per layer

  bool valid() const noexcept { return !inputs.empty(); }
  void clear() {
    inputs.clear();
    preactivations.clear();
  }
};

/// Parameter gradients shaped like the network, plus the gradient with
/// respect to the input batch.
struct Gradients {
  std::vector<Matrix> weight;
  std::vector<std::vector<float>> bias;
  Matrix input;

  bool all_finite() const;
  /// this += scale · other (parameter parts only).
  void add_scaled(const Gradients& other, float scale);
};

class Mlp {
 public:
  Mlp() = default;
  /// Zero-initialized network.
  Mlp(std::vector<std::size_t> layer_sizes, Activation hidden, Activation output);

  /// He-uniform weights for relu-family hidden layers, Glorot-uniform otherwise;
  /// zero biases.
  static Mlp random(std::vector<std::size_t> layer_sizes, Activation hidden, Activation output,
                    Rng& rng);

  const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  std::size_t parameter_count() const;
  Activation hidden_activation() const noexcept { return hidden_; }
  Activation output_activation() const noexcept { return output_; }
  Activation activation_of(std::size_t layer) const {
    return layer + 1 == layers_.size() ? output_ : hidden_;
  }

  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  /// Forward pass that records what backward needs.
  Matrix forward(const Matrix& batch, ForwardCache& cache) const;
  /// Cache-free forward, row-parallel.
  Matrix predict(const Matrix& batch) const;
  /// Backpropagates dL/d(output) through the cached pass.
  Gradients backward(const ForwardCache& cache, const Matrix& loss_grad) const;

  Gradients zero_gradients() const;

  bool operator==(const Mlp&) const = default;

 private:
  void check_input(const Matrix& batch) const;

  std::vector<std::size_t> sizes_;
  Activation hidden_ = Activation::Identity;
  Activation output_ = Activation::Identity;
  std::vector<DenseLayer> layers_;
};

void apply_activation(Activation a, std::span<float> values);
/// grad *= σ'(pre), elementwise.
void apply_activation_grad(Activation a, std::span<const float> pre, std::span<float> grad);

}  // namespace densctl
