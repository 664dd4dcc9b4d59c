#include "doctest.h"

#include <cmath>
#include <numbers>

#include "densctl/synthetic.hpp"

using densctl::SyntheticSpec;

TEST_CASE("standard Gaussian: sample mean within 0.1 of 0") {
  const auto spec = SyntheticSpec::isotropic({{0.0, 0.0, 0.0}}, {1.0}, {1.0}, 1000, 12);
  const auto data = densctl::generate_synthetic(spec);
  for (std::size_t j = 0; j < 3; ++j) {
    double m = 0;
    for (std::size_t i = 0; i < 1000; ++i) m += data.features.features(i, j);
    CHECK(std::abs(m / 1000) < 0.1);
  }
}

TEST_CASE("two far-apart equal-weight components split about 50/50") {
  const std::size_t n = 4000;
  const auto spec = SyntheticSpec::isotropic({{-50.0}, {50.0}}, {1.0, 1.0}, {0.5, 0.5}, n, 3);
  const auto data = densctl::generate_synthetic(spec);
  std::size_t first = 0;
  for (std::size_t i = 0; i < n; ++i) {
    first += data.component[i] == 0;
    CHECK((data.features.features(i, 0) < 0) == (data.component[i] == 0));
  }
  const double se = std::sqrt(0.25 / n);
  CHECK(std::abs(static_cast<double>(first) / n - 0.5) < 3 * se);
}

TEST_CASE("N = 0 gives an empty valid set") {
  const auto data = densctl::generate_synthetic(SyntheticSpec::ring(8, 2, 0.2, 0, 1));
  CHECK(data.features.size() == 0);
  CHECK(data.true_density.empty());
}

TEST_CASE("generation is seed-deterministic") {
  const auto a = densctl::generate_synthetic(SyntheticSpec::two_moons(0.1, 300, 5));
  const auto b = densctl::generate_synthetic(SyntheticSpec::two_moons(0.1, 300, 5));
  CHECK(a.features.features == b.features.features);
  CHECK(a.true_density == b.true_density);
}

TEST_CASE("analytic density: closed-form Gaussian value and normalization") {
  const auto spec = SyntheticSpec::isotropic({{0.0, 0.0}}, {2.0}, {1.0}, 0, 0);
  densctl::Matrix origin(1, 2);
  CHECK(densctl::analytic_density(spec, origin)[0] ==
        doctest::Approx(1.0 / (2 * std::numbers::pi * 4.0)).epsilon(1e-12));

  // Grid integral of ring and two-moons densities ≈ 1.
  for (const auto& s : {SyntheticSpec::ring(8, 2.0, 0.3, 0, 0), SyntheticSpec::two_moons(0.15, 0, 0)}) {
    const double lo = -4.0, hi = 4.0, step = 0.05;
    const auto cells = static_cast<std::size_t>((hi - lo) / step);
    densctl::Matrix grid(cells * cells, 2);
    for (std::size_t i = 0; i < cells; ++i) {
      for (std::size_t j = 0; j < cells; ++j) {
        grid(i * cells + j, 0) = static_cast<float>(lo + (i + 0.5) * step);
        grid(i * cells + j, 1) = static_cast<float>(lo + (j + 0.5) * step);
      }
    }
    double mass = 0;
    for (double v : densctl::analytic_density(s, grid)) mass += v * step * step;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("invalid specs are rejected") {
  auto spec = SyntheticSpec::isotropic({{0.0}, {1.0}}, {1.0, 1.0}, {0.5, 0.4}, 10, 0);
  CHECK_THROWS_AS(densctl::generate_synthetic(spec), densctl::Error);
  spec = SyntheticSpec::isotropic({{0.0, 0.0}}, {1.0}, {1.0}, 10, 0);
  spec.components[0].covariance = {1.0, 2.0, 2.0, 1.0};  // indefinite
  CHECK_THROWS_AS(densctl::generate_synthetic(spec), densctl::Error);
}
