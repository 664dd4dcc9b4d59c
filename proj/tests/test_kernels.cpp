#include "doctest.h"

#include "densctl/kernels.hpp"
#include "densctl/rng.hpp"
#include "oracle.hpp"

namespace k = densctl::kernels;
using densctl::Matrix;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, densctl::Rng& rng) {
  Matrix m(rows, cols);
  for (float& v : m.data()) v = static_cast<float>(rng.normal());
  return m;
}

}  // namespace

TEST_CASE("parallel kernels are bitwise equal to the serial reference") {
  densctl::Rng rng(5);
  const Matrix refs = random_matrix(300, 3, rng);
  const Matrix queries = random_matrix(120, 3, rng);

  const auto ks = k::serial::knn(refs, refs, 7, true);
  const auto kp = k::omp::knn(refs, refs, 7, true);
  CHECK(ks.distances == kp.distances);
  CHECK(ks.indices == kp.indices);

  const auto qs = k::serial::knn(queries, refs, 4, false);
  const auto qp = k::omp::knn(queries, refs, 4, false);
  CHECK(qs.distances == qp.distances);

  std::vector<double> radii(refs.rows());
  for (std::size_t i = 0; i < radii.size(); ++i) radii[i] = ks.distance(i, 6);
  CHECK(k::serial::covered(queries, refs, radii) == k::omp::covered(queries, refs, radii));

  const Matrix w = random_matrix(3, 16, rng);
  std::vector<float> bias(16, 0.25f);
  CHECK(k::serial::affine(queries, w, bias) == k::omp::affine(queries, w, bias));
}

TEST_CASE("knn: sorted distances, self excluded, ties toward lower index") {
  const Matrix x = oracle::column({0, 1, 2, 4});
  const auto r = k::omp::knn(x, x, 2, true);
  CHECK(r.distance(0, 0) == 1.0);
  CHECK(r.distance(0, 1) == 2.0);
  // Point 1 sees 0 and 2 at distance 1: the lower index comes first.
  CHECK(r.index(1, 0) == 0);
  CHECK(r.index(1, 1) == 2);
  CHECK(r.distance(3, 0) == 2.0);
  CHECK(r.distance(3, 1) == 3.0);
}

TEST_CASE("knn rejects k >= N when excluding self") {
  const Matrix x = oracle::column({0, 1, 2});
  CHECK_THROWS_AS(k::omp::knn(x, x, 3, true), densctl::Error);
  CHECK_NOTHROW(k::omp::knn(x, x, 2, true));
}

TEST_CASE("covered uses a closed ball") {
  const Matrix refs = oracle::column({0});
  const double radius[] = {1.0};
  const Matrix q = oracle::column({1.0, -1.0, 1.0001});
  const auto c = k::omp::covered(q, refs, radius);
  CHECK(c == std::vector<std::uint8_t>{1, 1, 0});
}
