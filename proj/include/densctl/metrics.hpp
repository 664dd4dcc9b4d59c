#pragma once

#include <cstdint>
#include <vector>

#include "densctl/features.hpp"

namespace densctl {

inline constexpr std::size_t kDefaultManifoldK = 3;

/// k-NN hypersphere cover of a point set. Exact duplicates are collapsed first,
/// so every radius is positive unless fewer than k+1 distinct points remain
/// (rejected).
struct ManifoldIndex {
  Matrix points;               // distinct reference rows
  std::vector<double> radii;   // distance to k-th nearest other point
  std::size_t k = 0;

  /// 1 per query row inside at least one closed ball (boundary counts).
  std::vector<std::uint8_t> covers(const Matrix& queries) const;
  double coverage(const Matrix& queries) const;
};

ManifoldIndex build_manifold(const FeatureSet& fs, std::size_t k = kDefaultManifoldK);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

/// Precision: share of generated rows inside the real manifold. Recall: share
/// of real rows inside the generated manifold.
PrecisionRecall precision_recall(const FeatureSet& real, const FeatureSet& gen,
                                 std::size_t k = kDefaultManifoldK);

struct FrechetResult {
  double distance = 0.0;
  /// Diagonal jitter added to both covariances (0 when none was needed).
  double jitter = 0.0;
};

/// ‖μ_a − μ_b‖² + Tr(Σ_a + Σ_b − 2(Σ_a^{1/2} Σ_b Σ_a^{1/2})^{1/2}), unbiased
/// covariances. Rank-deficient covariances get +1e-6 on the diagonal.
FrechetResult frechet(const FeatureSet& a, const FeatureSet& b);
inline double frechet_distance(const FeatureSet& a, const FeatureSet& b) { return frechet(a, b).distance; }

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double frechet_distance = 0.0;
  double frechet_jitter = 0.0;
  std::size_t real_count = 0;
  std::size_t gen_count = 0;
  std::size_t k = kDefaultManifoldK;
};

EvalReport evaluate(const FeatureSet& real, const FeatureSet& gen, std::size_t k = kDefaultManifoldK);

}  // namespace densctl
