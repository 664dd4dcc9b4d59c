#pragma once

#include <vector>

#include "densctl/density.hpp"
#include "densctl/mlp.hpp"

namespace densctl {

enum class Direction { Ascend, Descend };

const char* to_string(Direction d);
Direction direction_from_string(std::string_view name);

struct PerturbConfig {
  std::size_t steps = 10;
  double step_size = 0.025;
  /// L∞ budget on δ.
  double budget = 0.1;
  Direction direction = Direction::Ascend;
  /// Scale each row's gradient to unit L2 norm before stepping. Off by default.
  bool normalize_gradient = false;

  /// Budget used for perturbing diffusion input noise.
  static PerturbConfig diffusion() { return {5, 0.0025, 0.0125, Direction::Ascend, false}; }
};

struct PerturbResult {
  std::vector<double> original_z;
  /// original_z + delta, in double. The generator sees its float rounding.
  std::vector<double> final_z;
  std::vector<double> delta;
  double density_before = 0.0;
  double density_after = 0.0;
  /// Density at δ₀ = 0 and after each of the K steps (K+1 entries).
  std::vector<double> density_trace;
  /// ‖δ‖∞ after each step (K entries).
  std::vector<double> delta_norm_trace;
};

/// Pseudo density of G(z) per row and its gradient with respect to z.
struct LatentGradient {
  std::vector<double> density;
  Matrix gradient;
};
LatentGradient density_latent_gradient(const Mlp& gen, const DensityRegressor& reg, const Matrix& z);

/// Projected gradient steps on δ: δ ← clip(δ ± α·∇δ ρ(G(z+δ)), −ε, ε), δ₀ = 0.
/// Rows are independent; the batch is processed together.
std::vector<PerturbResult> perturb_latents(const Mlp& gen, const DensityRegressor& reg, const Matrix& z,
                                           const PerturbConfig& cfg);
PerturbResult perturb_latent(const Mlp& gen, const DensityRegressor& reg, std::span<const float> z,
                             const PerturbConfig& cfg);

}  // namespace densctl
