#include "densctl/matrix.hpp"

#include <cmath>
#include <string>

#include "densctl/kernels.hpp"
#include "accumulate.hpp"

namespace densctl {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    fail(ErrorKind::DimensionMismatch, "matrix data length " + std::to_string(data_.size()) +
                                           " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

bool Matrix::all_finite() const noexcept {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix Matrix::slice_rows(std::size_t begin, std::size_t count) const {
  require(begin + count <= rows_, ErrorKind::DimensionMismatch, "row slice out of range");
  std::vector<float> out(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
                         data_.begin() + static_cast<std::ptrdiff_t>((begin + count) * cols_));
  return Matrix(count, cols_, std::move(out));
}

Matrix Matrix::gather_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < rows_, ErrorKind::DimensionMismatch, "gather index out of range");
    auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void Matrix::append_row(std::span<const float> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  require(values.size() == cols_, ErrorKind::DimensionMismatch, "append_row width mismatch");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

Matrix matmul(const Matrix& a, const Matrix& b) { return kernels::omp::affine(a, b, {}); }

Matrix matmul_bias(const Matrix& a, const Matrix& b, std::span<const float> bias) {
  return kernels::omp::affine(a, b, bias);
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), ErrorKind::DimensionMismatch, "matmul_tn: row counts differ");
  const std::size_t n = a.rows(), p = a.cols(), q = b.cols();
  std::vector<double> acc(p * q, 0.0);
  // Row i of the result sums column i of a against the rows of b.
  for (std::size_t i = 0; i < p; ++i)
    detail::accumulate_rows(a.data().data() + i, p, n, b.data().data(), q, q, acc.data() + i * q);
  Matrix out(p, q);
  for (std::size_t i = 0; i < acc.size(); ++i) out.data()[i] = static_cast<float>(acc[i]);
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), ErrorKind::DimensionMismatch, "matmul_nt: column counts differ");
  // Row-axpy form over bᵀ so the inner loop vectorizes; each output element is
  // still summed in double in a fixed order.
  const std::size_t m = b.rows(), p = a.cols();
  std::vector<float> bt(p * m);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < p; ++i) bt[i * m + j] = b(j, i);
  }
  Matrix out(a.rows(), m);
  std::vector<double> acc(m);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    detail::accumulate_rows(a.row(r).data(), 1, p, bt.data(), m, m, acc.data());
    auto dst = out.row(r);
    for (std::size_t j = 0; j < m; ++j) dst[j] = static_cast<float>(acc[j]);
  }
  return out;
}

Matrix vstack(const Matrix& top, const Matrix& bottom) {
  if (top.rows() == 0) return bottom;
  if (bottom.rows() == 0) return top;
  require(top.cols() == bottom.cols(), ErrorKind::DimensionMismatch, "vstack width mismatch");
  std::vector<float> data(top.values());
  data.insert(data.end(), bottom.values().begin(), bottom.values().end());
  return Matrix(top.rows() + bottom.rows(), top.cols(), std::move(data));
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return;
  fail(ErrorKind::DimensionMismatch, std::string(what) + ": shape " + std::to_string(a.rows()) +
                                         "x" + std::to_string(a.cols()) + " vs " +
                                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

}  // namespace densctl
