#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "densctl/density.hpp"
#include "densctl/mlp.hpp"
#include "densctl/rng.hpp"

namespace densctl {

inline constexpr std::size_t kDefaultMaxAttemptsPerAccept = 10000;

/// Shrinks latents toward their mean: z' = mean + Φ·(z − mean).
struct TruncationConfig {
  double phi = 1.0;
  /// Empty means the zero vector.
  std::vector<float> latent_mean;
};

Matrix truncate_latents(const Matrix& z, const TruncationConfig& cfg);

struct SamplingConfig {
  double tau = 0.0;
  double weight = 1.0;
  /// Consecutive rejections tolerated before the run is declared starved.
  std::size_t max_attempts_per_accept = kDefaultMaxAttemptsPerAccept;
  std::optional<TruncationConfig> truncation;
};

void validate_weight(double w);

/// The two-branch rule. w > 1: keep when ρ > τ or u < 1/w. w ≤ 1: keep when
/// ρ < τ or u < w. ρ = τ always falls through to the u test.
bool accept_sample(double rho, double tau, double w, double u);

/// Expected acceptance probability for a proposal with a fraction
/// `fraction_below` of its mass strictly below τ:
///   w ≤ 1: b + (1 − b)·w      w > 1: (1 − b) + b/w
/// The reciprocal is the expected cost multiplier.
double acceptance_rate(double fraction_below, double w);

/// Every attempt in generation order, up to and including the K-th accept.
struct SampleBatch {
  Matrix latents;
  Matrix outputs;
  std::vector<double> densities;
  std::vector<std::uint8_t> accepted;
  std::size_t attempts = 0;

  std::size_t accepted_count() const;
  std::vector<std::size_t> accepted_indices() const;
  Matrix accepted_outputs() const;
  Matrix accepted_latents() const;
  double acceptance_rate() const;
};

/// Standard normal latents, row by row.
Matrix sample_latents(std::size_t count, std::size_t dim, Rng& rng);

/// Draws z ~ N(0, I) (optionally truncated), scores ρ(G(z)) and applies the
/// acceptance rule until `count` samples are kept. For every attempt the latent
/// is drawn first, then u.
SampleBatch importance_sample(const Mlp& gen, const DensityRegressor& reg, const SamplingConfig& cfg,
                              std::size_t count, Rng& rng);

}  // namespace densctl
