#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "densctl/features.hpp"
#include "densctl/mlp.hpp"

namespace densctl {

struct DensityConfig {
  std::size_t k = 10;
  /// Effective manifold dimensionality used in the volume term.
  unsigned n = 1;
};

inline constexpr unsigned kMaxManifoldDim = 8;

struct DensityEstimate {
  /// Normalized so that the mean is 1.
  std::vector<double> densities;
  std::vector<double> avg_knn_distances;
  DensityConfig config;
  /// Rows that were exact copies of an earlier row and inherited its density.
  std::size_t duplicates = 0;

  std::size_t size() const noexcept { return densities.size(); }
};

/// Mean Euclidean distance from each row to its k nearest other rows. Exact
/// brute force; duplicate rows can yield zeros here.
std::vector<double> knn_avg_distance(const FeatureSet& fs, const DensityConfig& cfg);

/// Volume-based density ρ_i = N·d_i^{-n} / Σ_j d_j^{-n}. The unit-ball constant
/// cancels in the normalization and is never formed. Exact duplicate rows are
/// collapsed before the neighbor search and share their representative's value.
DensityEstimate estimate_density(const FeatureSet& fs, const DensityConfig& cfg);

struct RegressorConfig {
  std::vector<std::size_t> hidden = {64, 64, 64};
  Activation activation = Activation::LeakyRelu;
  std::size_t epochs = 300;
  std::size_t batch_size = 32;
  double learning_rate = 3e-3;
  double holdout_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct RegressorStats {
  double train_mse = 0.0;
  double heldout_mse = 0.0;
  double heldout_r2 = 0.0;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  /// Axis-aligned box of the training features; empty when unknown (e.g. a
  /// regressor loaded from a checkpoint).
  std::vector<float> box_min, box_max;
};

struct DensityRegressor {
  Mlp net;
  RegressorStats stats;

  std::size_t input_dim() const { return net.input_dim(); }
};

/// MSE regression of the normalized densities on the raw features. Inputs are
/// standardized during training and the standardization is folded into the
/// first layer afterward, so `net` consumes raw features.
DensityRegressor train_regressor(const FeatureSet& fs, const DensityEstimate& est,
                                 const RegressorConfig& cfg);

/// Regressor output per row, in row order.
std::vector<double> pseudo_density(const DensityRegressor& reg, const Matrix& features);

/// d(pseudo density)/d(features), one row per input row.
Matrix pseudo_density_gradient(const DensityRegressor& reg, const Matrix& features);

/// Rows that fall outside the training box (extrapolation); 0 when the box is
/// unknown.
std::size_t count_extrapolated(const DensityRegressor& reg, const Matrix& features);

struct ThresholdCalibration {
  double percentile = 50.0;
  double threshold = 0.0;
};

/// Nearest-rank percentile: the ⌈p/100·N⌉-th smallest value (1-based).
ThresholdCalibration calibrate_threshold(std::span<const double> densities, double percentile);
inline ThresholdCalibration calibrate_threshold(const DensityEstimate& est, double percentile) {
  return calibrate_threshold(est.densities, percentile);
}

/// Indices of each row's representative (first occurrence of an identical
/// row) and the list of representatives in order.
struct Dedup {
  std::vector<std::size_t> representative_of;  // per input row -> index into `unique`
  std::vector<std::size_t> unique;             // input row indices of representatives
};
Dedup dedup_rows(const Matrix& m);

}  // namespace densctl
