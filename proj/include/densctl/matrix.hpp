#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "densctl/error.hpp"

namespace densctl {

/// Row-major dense matrix with 32-bit storage. Reductions that touch it
/// accumulate in double.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  const std::vector<float>& values() const noexcept { return data_; }

  bool all_finite() const noexcept;

  /// Rows [begin, begin+count).
  Matrix slice_rows(std::size_t begin, std::size_t count) const;
  /// Gathers the given rows in order.
  Matrix gather_rows(std::span<const std::size_t> indices) const;
  void append_row(std::span<const float> values);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

/// out = a · b (+ bias broadcast over rows when non-empty); double accumulation.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_bias(const Matrix& a, const Matrix& b, std::span<const float> bias);
/// aᵀ · b, used for weight gradients.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a · bᵀ, used for input gradients.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix vstack(const Matrix& top, const Matrix& bottom);

void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

}  // namespace densctl
