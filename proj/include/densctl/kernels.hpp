#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "densctl/matrix.hpp"

// Row-parallel numeric kernels. Every kernel exists twice with the same
// signature: `serial` is the plain reference loop, `omp` partitions the outer
// row loop across OpenMP threads. Each output row is produced by the same
// sequence of floating-point operations in both, so results are bitwise equal
// and the serial version serves as the test oracle.

namespace densctl::kernels {

/// Sorted distances from each query row to its k nearest reference rows.
/// Row-major queries.rows() × k. When `exclude_self` is set, queries and refs
/// must be the same matrix and row i never counts as its own neighbor.
/// Ties break toward the lower reference index.
struct KnnResult {
  std::size_t k = 0;
  std::vector<double> distances;
  std::vector<std::uint32_t> indices;

  double distance(std::size_t row, std::size_t j) const { return distances[row * k + j]; }
  std::uint32_t index(std::size_t row, std::size_t j) const { return indices[row * k + j]; }
};

/// Euclidean distance with double accumulation.
double euclidean(std::span<const float> a, std::span<const float> b);

namespace serial {
KnnResult knn(const Matrix& queries, const Matrix& refs, std::size_t k, bool exclude_self);
/// covered[q] = 1 iff some reference i has dist(q, ref_i) ≤ radii[i].
std::vector<std::uint8_t> covered(const Matrix& queries, const Matrix& refs,
                                  std::span<const double> radii);
/// out = a · w + bias.
Matrix affine(const Matrix& a, const Matrix& w, std::span<const float> bias);
}  // namespace serial

namespace omp {
KnnResult knn(const Matrix& queries, const Matrix& refs, std::size_t k, bool exclude_self);
std::vector<std::uint8_t> covered(const Matrix& queries, const Matrix& refs,
                                  std::span<const double> radii);
Matrix affine(const Matrix& a, const Matrix& w, std::span<const float> bias);
}  // namespace omp

int max_threads();

}  // namespace densctl::kernels
