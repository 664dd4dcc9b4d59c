#pragma once

#include <cstdint>
#include <vector>

#include "densctl/mlp.hpp"

namespace densctl {

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// SGD or Adam state for one network. Moments mirror the parameter shapes.
class OptimizerState {
 public:
  OptimizerState() = default;
  OptimizerState(const Mlp& net, OptimizerConfig config);

  const OptimizerConfig& config() const noexcept { return config_; }
  std::uint64_t step_count() const noexcept { return steps_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

  /// Applies one update in place. Rejects non-finite gradients before touching
  /// any parameter.
  void step(Mlp& net, const Gradients& grads);

 private:
  OptimizerConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<std::vector<double>> m_weight_, v_weight_;
  std::vector<std::vector<double>> m_bias_, v_bias_;
};

}  // namespace densctl
