#include "densctl/optimizer.hpp"

#include <cmath>

namespace densctl {

OptimizerState::OptimizerState(const Mlp& net, OptimizerConfig config) : config_(config) {
  require(config_.learning_rate > 0.0, ErrorKind::InvalidArgument, "learning rate must be > 0");
  if (config_.kind == OptimizerKind::Adam) {
    for (const auto& layer : net.layers()) {
      m_weight_.emplace_back(layer.weight.size(), 0.0);
      v_weight_.emplace_back(layer.weight.size(), 0.0);
      m_bias_.emplace_back(layer.bias.size(), 0.0);
      v_bias_.emplace_back(layer.bias.size(), 0.0);
    }
  }
}

void OptimizerState::step(Mlp& net, const Gradients& grads) {
  require(grads.weight.size() == net.layer_count() && grads.bias.size() == net.layer_count(),
          ErrorKind::DimensionMismatch, "gradient layer count does not match network");
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    require_same_shape(grads.weight[l], net.layers()[l].weight, "optimizer step");
    require(grads.bias[l].size() == net.layers()[l].bias.size(), ErrorKind::DimensionMismatch,
            "optimizer step: bias shape");
  }
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    for (float g : grads.weight[l].data()) {
      require(std::isfinite(g), ErrorKind::NonFinite, "optimizer step: non-finite gradient");
    }
    for (float g : grads.bias[l]) {
      require(std::isfinite(g), ErrorKind::NonFinite, "optimizer step: non-finite gradient");
    }
  }
  if (config_.kind == OptimizerKind::Adam && m_weight_.size() != net.layer_count()) {
    *this = OptimizerState(net, config_);
  }

  ++steps_;
  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerKind::Sgd) {
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      auto w = net.layers()[l].weight.data();
      auto gw = grads.weight[l].data();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>(w[i] - lr * gw[i]);
      auto& b = net.layers()[l].bias;
      for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<float>(b[i] - lr * grads.bias[l][i]);
    }
    return;
  }

  const double b1 = config_.beta1, b2 = config_.beta2, eps = config_.epsilon;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  auto update = [&](std::span<float> param, std::span<const float> grad, std::vector<double>& m,
                    std::vector<double>& v) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double g = grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      param[i] = static_cast<float>(param[i] - lr * mhat / (std::sqrt(vhat) + eps));
    }
  };
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    update(net.layers()[l].weight.data(), grads.weight[l].data(), m_weight_[l], v_weight_[l]);
    update(net.layers()[l].bias, grads.bias[l], m_bias_[l], v_bias_[l]);
  }
}

}  // namespace densctl
