#include "doctest.h"

#include <cmath>
#include <limits>

#include "densctl/matrix.hpp"

using densctl::Matrix;

TEST_CASE("matrix rejects data of the wrong length") {
  CHECK_THROWS_AS(Matrix(2, 3, std::vector<float>(5)), densctl::Error);
  Matrix m(2, 3, std::vector<float>{1, 2, 3, 4, 5, 6});
  CHECK(m(1, 0) == 4.0f);
  CHECK(m.row(1)[2] == 6.0f);
}

TEST_CASE("matmul computes products and rejects mismatched shapes") {
  Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
  Matrix b(3, 2, {1, 0, 0, 1, 1, 1});
  const Matrix c = densctl::matmul(a, b);
  CHECK(c == Matrix(2, 2, {4, 5, 10, 11}));
  const float bias[] = {1.0f, -1.0f};
  CHECK(densctl::matmul_bias(a, b, bias) == Matrix(2, 2, {5, 4, 11, 10}));
  CHECK_THROWS_AS(densctl::matmul(a, a), densctl::Error);

  // aᵀ·b and a·bᵀ against the plain product
  Matrix at(3, 2, {1, 4, 2, 5, 3, 6});
  CHECK(densctl::matmul_tn(a, Matrix(2, 2, {1, 0, 0, 1})) == at);
  CHECK(densctl::matmul_nt(a, Matrix(2, 3, {1, 0, 0, 0, 1, 0})) == Matrix(2, 2, {1, 2, 4, 5}));
}

TEST_CASE("row utilities") {
  Matrix m(3, 2, {1, 2, 3, 4, 5, 6});
  CHECK(m.slice_rows(1, 2) == Matrix(2, 2, {3, 4, 5, 6}));
  const std::size_t idx[] = {2, 0};
  CHECK(m.gather_rows(idx) == Matrix(2, 2, {5, 6, 1, 2}));
  CHECK(densctl::vstack(m, Matrix()) == m);
  Matrix grown;
  const float r[] = {7, 8};
  grown.append_row(r);
  CHECK(grown.rows() == 1);
  CHECK(grown.cols() == 2);
  m(0, 0) = std::numeric_limits<float>::quiet_NaN();
  CHECK_FALSE(m.all_finite());
}
