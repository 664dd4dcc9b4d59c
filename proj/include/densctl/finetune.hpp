#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "densctl/density.hpp"
#include "densctl/gan.hpp"
#include "densctl/sampler.hpp"

namespace densctl {

/// Real samples with precomputed pseudo densities, drawn by rejection against
/// the acceptance rule for (τ, w). Usable as a data loader by any trainer.
class WeightedDataset {
 public:
  WeightedDataset(Matrix samples, std::vector<double> densities, double tau, double weight);

  std::size_t size() const noexcept { return samples_.rows(); }
  const Matrix& samples() const noexcept { return samples_; }
  std::span<const double> densities() const noexcept { return densities_; }
  double tau() const noexcept { return tau_; }
  double weight() const noexcept { return weight_; }

  /// Probability that a proposal of sample i survives the rule: 1, w or 1/w.
  double acceptance_probability(std::size_t i) const;
  /// Per-sample probability of being drawn; sums to 1.
  std::vector<double> sampling_distribution() const;

  /// B indices drawn with replacement: propose uniformly, keep by the rule.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng,
                                          std::size_t max_attempts_per_accept = kDefaultMaxAttemptsPerAccept) const;
  Matrix sample_batch(std::size_t count, Rng& rng,
                      std::size_t max_attempts_per_accept = kDefaultMaxAttemptsPerAccept) const;

 private:
  Matrix samples_;
  std::vector<double> densities_;
  double tau_;
  double weight_;
};

struct FinetuneConfig {
  std::size_t batch_size = 64;
  std::size_t iterations = 600;
  double tau = 0.0;
  double weight = 1.0;
  /// The generator moves ten times slower than the critic: with a single
  /// critic step per iteration, equal rates let the pair drift apart.
  GanOptimConfig optim{1e-5, 1e-4, 0.5, 0.9};
  double penalty_coef = 0.1;
  std::size_t max_attempts_per_accept = kDefaultMaxAttemptsPerAccept;
  std::uint64_t seed = 0;
};

/// Thrown when a loss turns non-finite; carries the pair as it was before the
/// failing iteration.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, GanPair last_good)
      : Error(ErrorKind::Divergence, what), last_good_(std::move(last_good)) {}
  const GanPair& last_good() const noexcept { return last_good_; }

 private:
  GanPair last_good_;
};

/// Per iteration: a real batch drawn with (τ, w); two generated batches kept
/// with (τ, 1/w), one for the critic step and one for the generator step;
/// one critic step, then one generator step. Optimizer state is reset from
/// cfg.optim at the start.
GanPair finetune_gan(GanPair pair, const DensityRegressor& reg, const WeightedDataset& real,
                     const FinetuneConfig& cfg);

/// Mass above and below τ.
struct TwoBin {
  double above = 0.5;
  double below = 0.5;
};

/// Fixed point of the two-bin model: the generated split g whose (τ, 1/w)
/// filtered odds equal the real split's (τ, w) filtered odds. Both filters
/// scale the above:below odds by their weight, so g/(1−g) = w²·a/(1−a).
TwoBin equilibrium_target(TwoBin real, double w);

}  // namespace densctl
