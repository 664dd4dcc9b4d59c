#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "densctl/density.hpp"
#include "densctl/features.hpp"
#include "densctl/mlp.hpp"

namespace densctl {

struct SweepConfig {
  std::vector<double> tau_percentiles = {20, 50, 80};
  std::vector<double> weights = {0.01, 0.03, 0.1, 10, 33, 100};
  /// Accepted samples per configuration.
  std::size_t count = 2000;
  std::size_t knn = 3;
  std::uint64_t seed = 0;
};

struct SweepPoint {
  double tau_percentile = 0.0;
  double tau = 0.0;
  double weight = 1.0;
  double precision = 0.0;
  double recall = 0.0;
  double frechet = 0.0;
  double acceptance_rate = 1.0;
  std::size_t attempts = 0;
};

/// a is at least as good as b on both axes and strictly better on one.
bool dominates(const SweepPoint& a, const SweepPoint& b);
/// Indices of the points no other point dominates, in input order.
std::vector<std::size_t> pareto_front(std::span<const SweepPoint> points);

struct SweepResult {
  /// Unfiltered sampling (w = 1), same seed as every configuration.
  SweepPoint baseline;
  Matrix baseline_samples;
  /// τ-major, weights in config order.
  std::vector<SweepPoint> points;
  /// Accepted outputs per point.
  std::vector<Matrix> samples;
  /// Per τ, precision never decreases as w grows (w = 1 included).
  bool precision_monotone = true;
  /// Configurations the baseline dominates.
  std::vector<std::size_t> dominated_by_baseline;
};

/// Inference-time sampling over the τ × w grid. τ is the given percentile of
/// `real_densities`; every configuration draws from Rng(seed) and is scored
/// against `real_eval`.
SweepResult sweep_sampling(const Mlp& gen, const DensityRegressor& reg, std::span<const double> real_densities,
                           const FeatureSet& real_eval, const SweepConfig& cfg);

}  // namespace densctl
