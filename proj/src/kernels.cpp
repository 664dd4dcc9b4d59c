#include "densctl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "accumulate.hpp"

namespace densctl::kernels {
namespace {

// Per-row bodies shared by both execution paths; this is what makes the
// parallel result bitwise equal to the serial one.

void knn_row(const Matrix& queries, const Matrix& refs, std::size_t q, std::size_t k,
             bool exclude_self, double* out_dist, std::uint32_t* out_idx) {
  std::size_t filled = 0;
  auto qrow = queries.row(q);
  for (std::size_t r = 0; r < refs.rows(); ++r) {
    if (exclude_self && r == q) continue;
    const double d = euclidean(qrow, refs.row(r));
    // Strict comparison keeps the earlier (lower) index on ties.
    if (filled == k && !(d < out_dist[k - 1])) continue;
    std::size_t pos = filled < k ? filled++ : k - 1;
    while (pos > 0 && d < out_dist[pos - 1]) {
      out_dist[pos] = out_dist[pos - 1];
      out_idx[pos] = out_idx[pos - 1];
      --pos;
    }
    out_dist[pos] = d;
    out_idx[pos] = static_cast<std::uint32_t>(r);
  }
}

std::uint8_t covered_row(std::span<const float> q, const Matrix& refs,
                         std::span<const double> radii) {
  for (std::size_t r = 0; r < refs.rows(); ++r) {
    if (euclidean(q, refs.row(r)) <= radii[r]) return 1;
  }
  return 0;
}

void affine_row(std::span<const float> a, const Matrix& w, std::span<const float> bias,
                std::span<float> out, std::vector<double>& acc) {
  const std::size_t m = w.cols();
  detail::accumulate_rows(a.data(), 1, a.size(), w.data().data(), m, m, acc.data());
  for (std::size_t j = 0; j < m; ++j) {
    const double b = bias.empty() ? 0.0 : static_cast<double>(bias[j]);
    out[j] = static_cast<float>(acc[j] + b);
  }
}

void check_knn(const Matrix& queries, const Matrix& refs, std::size_t k, bool exclude_self) {
  require(k >= 1, ErrorKind::InvalidArgument, "knn: k must be >= 1");
  require(queries.cols() == refs.cols(), ErrorKind::DimensionMismatch,
          "knn: query and reference dimensions differ");
  if (exclude_self) {
    require(&queries == &refs || queries == refs, ErrorKind::InvalidArgument,
            "knn: exclude_self requires queries == refs");
  }
  const std::size_t available = refs.rows() - (exclude_self ? 1 : 0);
  if (refs.rows() == 0 || available < k) {
    fail(ErrorKind::InvalidArgument, "knn: need more than k reference points (k=" +
                                         std::to_string(k) + ", N=" + std::to_string(refs.rows()) + ")");
  }
}

KnnResult make_knn(std::size_t rows, std::size_t k) {
  KnnResult out;
  out.k = k;
  out.distances.assign(rows * k, std::numeric_limits<double>::infinity());
  out.indices.assign(rows * k, 0);
  return out;
}

void check_affine(const Matrix& a, const Matrix& w, std::span<const float> bias) {
  if (a.cols() != w.rows()) {
    fail(ErrorKind::DimensionMismatch, "affine: input width " + std::to_string(a.cols()) +
                                           " != weight rows " + std::to_string(w.rows()));
  }
  require(bias.empty() || bias.size() == w.cols(), ErrorKind::DimensionMismatch,
          "affine: bias length mismatch");
}

}  // namespace

double euclidean(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

namespace serial {

KnnResult knn(const Matrix& queries, const Matrix& refs, std::size_t k, bool exclude_self) {
  check_knn(queries, refs, k, exclude_self);
  KnnResult out = make_knn(queries.rows(), k);
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    knn_row(queries, refs, q, k, exclude_self, out.distances.data() + q * k,
            out.indices.data() + q * k);
  }
  return out;
}

std::vector<std::uint8_t> covered(const Matrix& queries, const Matrix& refs,
                                  std::span<const double> radii) {
  require(radii.size() == refs.rows(), ErrorKind::DimensionMismatch, "covered: radii length");
  require(queries.rows() == 0 || queries.cols() == refs.cols(), ErrorKind::DimensionMismatch,
          "covered: dimension mismatch");
  std::vector<std::uint8_t> out(queries.rows(), 0);
  for (std::size_t q = 0; q < queries.rows(); ++q) out[q] = covered_row(queries.row(q), refs, radii);
  return out;
}

Matrix affine(const Matrix& a, const Matrix& w, std::span<const float> bias) {
  check_affine(a, w, bias);
  Matrix out(a.rows(), w.cols());
  std::vector<double> acc(w.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) affine_row(a.row(r), w, bias, out.row(r), acc);
  return out;
}

}  // namespace serial

namespace omp {

KnnResult knn(const Matrix& queries, const Matrix& refs, std::size_t k, bool exclude_self) {
  check_knn(queries, refs, k, exclude_self);
  KnnResult out = make_knn(queries.rows(), k);
  const auto n = static_cast<std::ptrdiff_t>(queries.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t q = 0; q < n; ++q) {
    const auto row = static_cast<std::size_t>(q);
    knn_row(queries, refs, row, k, exclude_self, out.distances.data() + row * k,
            out.indices.data() + row * k);
  }
  return out;
}

std::vector<std::uint8_t> covered(const Matrix& queries, const Matrix& refs,
                                  std::span<const double> radii) {
  require(radii.size() == refs.rows(), ErrorKind::DimensionMismatch, "covered: radii length");
  require(queries.rows() == 0 || queries.cols() == refs.cols(), ErrorKind::DimensionMismatch,
          "covered: dimension mismatch");
  std::vector<std::uint8_t> out(queries.rows(), 0);
  const auto n = static_cast<std::ptrdiff_t>(queries.rows());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t q = 0; q < n; ++q) {
    out[static_cast<std::size_t>(q)] = covered_row(queries.row(static_cast<std::size_t>(q)), refs, radii);
  }
  return out;
}

Matrix affine(const Matrix& a, const Matrix& w, std::span<const float> bias) {
  check_affine(a, w, bias);
  Matrix out(a.rows(), w.cols());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel
  {
    std::vector<double> acc(w.cols());
#pragma omp for schedule(static)
    for (std::ptrdiff_t r = 0; r < n; ++r) {
      const auto row = static_cast<std::size_t>(r);
      affine_row(a.row(row), w, bias, out.row(row), acc);
    }
  }
  return out;
}

}  // namespace omp

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace densctl::kernels
