#include "doctest.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "densctl/density.hpp"
#include "densctl/stats.hpp"
#include "densctl/synthetic.hpp"
#include "oracle.hpp"

using densctl::DensityConfig;
using densctl::FeatureSet;
using densctl::Matrix;

namespace {

FeatureSet line(std::initializer_list<double> xs) { return {oracle::column(xs), "test"}; }

FeatureSet random_points(std::size_t n, std::size_t d, std::uint64_t seed) {
  densctl::Rng rng(seed);
  Matrix m(n, d);
  for (float& v : m.data()) v = static_cast<float>(rng.normal());
  return {m, "random"};
}

}  // namespace

TEST_CASE("knn_avg_distance hand examples") {
  CHECK(densctl::knn_avg_distance(line({0, 1, 2}), {1, 1}) == std::vector<double>{1, 1, 1});
  CHECK(densctl::knn_avg_distance(line({0, 1, 2, 4}), {1, 1}) == std::vector<double>{1, 1, 1, 2});
  CHECK(densctl::knn_avg_distance(line({0, 1, 2, 4}), {2, 1}) == std::vector<double>{1.5, 1, 1.5, 2.5});
}

TEST_CASE("knn_avg_distance requires N > k") {
  CHECK_THROWS_AS(densctl::knn_avg_distance(line({0, 1}), {2, 1}), densctl::Error);
}

TEST_CASE("estimate_density hand examples") {
  const auto equal = densctl::estimate_density(line({0, 1, 2}), {1, 1});
  for (double v : equal.densities) CHECK(v == doctest::Approx(1.0));

  const auto n1 = densctl::estimate_density(line({0, 1, 2, 4}), {1, 1});
  const std::vector<double> want1{8.0 / 7, 8.0 / 7, 8.0 / 7, 4.0 / 7};
  for (std::size_t i = 0; i < 4; ++i) CHECK(n1.densities[i] == doctest::Approx(want1[i]).epsilon(1e-12));

  const auto n2 = densctl::estimate_density(line({0, 1, 2, 4}), {1, 2});
  const std::vector<double> want2{16.0 / 13, 16.0 / 13, 16.0 / 13, 4.0 / 13};
  for (std::size_t i = 0; i < 4; ++i) CHECK(n2.densities[i] == doctest::Approx(want2[i]).epsilon(1e-12));
}

TEST_CASE("estimate_density rejects n outside [1, 8]") {
  CHECK_THROWS_AS(densctl::estimate_density(line({0, 1, 2}), {1, 0}), densctl::Error);
  CHECK_THROWS_AS(densctl::estimate_density(line({0, 1, 2}), {1, 9}), densctl::Error);
  CHECK_NOTHROW(densctl::estimate_density(line({0, 1, 2}), {1, 8}));
}

TEST_CASE("duplicates inherit their representative's density") {
  const auto est = densctl::estimate_density(line({0, 1, 1, 2, 4}), {1, 1});
  CHECK(est.duplicates == 1);
  // Unique set {0,1,2,4} gives d = [1,1,1,2]; row 2 copies row 1.
  CHECK(est.avg_knn_distances == std::vector<double>{1, 1, 1, 1, 2});
  CHECK(est.densities[1] == est.densities[2]);
  const double total = std::accumulate(est.densities.begin(), est.densities.end(), 0.0);
  CHECK(total == doctest::Approx(5.0).epsilon(1e-12));
  CHECK_THROWS_AS(densctl::estimate_density(line({1, 1, 1, 2}), {2, 1}), densctl::Error);
}

TEST_CASE("property: brute-force oracle equivalence, normalization, monotonicity") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const std::size_t n = 50 + 30 * seed, d = 1 + seed % 3;
    const FeatureSet fs = random_points(n, d, seed);
    const DensityConfig cfg{1 + seed % 5, static_cast<unsigned>(1 + seed % 2)};
    const auto est = densctl::estimate_density(fs, cfg);
    std::vector<std::vector<double>> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = oracle::row(fs.features, i);
    const auto want = oracle::brute_density(pts, cfg.k, cfg.n);
    for (std::size_t i = 0; i < n; ++i) CHECK(oracle::rel_err(est.densities[i], want[i], 0) < 1e-9);

    CHECK(densctl::stats::mean(est.densities) == doctest::Approx(1.0).epsilon(1e-6));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (est.avg_knn_distances[i] < est.avg_knn_distances[j]) CHECK(est.densities[i] > est.densities[j]);
      }
    }
  }
}

TEST_CASE("property: permutation equivariance and scale invariance") {
  const FeatureSet fs = random_points(80, 2, 17);
  const auto base = densctl::estimate_density(fs, {5, 2});

  std::vector<std::size_t> perm(80);
  std::iota(perm.begin(), perm.end(), 0);
  densctl::Rng rng(3);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  const auto permuted = densctl::estimate_density({fs.features.gather_rows(perm), ""}, {5, 2});
  for (std::size_t i = 0; i < perm.size(); ++i) CHECK(permuted.densities[i] == doctest::Approx(base.densities[perm[i]]).epsilon(1e-12));

  FeatureSet scaled = fs;
  for (float& v : scaled.features.data()) v *= 4.0f;  // power of two: exact in float
  const auto s = densctl::estimate_density(scaled, {5, 2});
  for (std::size_t i = 0; i < 80; ++i) {
    CHECK(s.avg_knn_distances[i] == doctest::Approx(4.0 * base.avg_knn_distances[i]).epsilon(1e-12));
    CHECK(s.densities[i] == doctest::Approx(base.densities[i]).epsilon(1e-12));
  }
}

TEST_CASE("calibrate_threshold nearest-rank examples") {
  const double a[] = {4.0 / 7, 8.0 / 7, 8.0 / 7, 8.0 / 7};
  CHECK(densctl::calibrate_threshold(a, 20).threshold == 4.0 / 7);
  const double b[] = {4, 3, 2, 1};
  CHECK(densctl::calibrate_threshold(b, 50).threshold == 2);
  CHECK(densctl::calibrate_threshold(b, 75).threshold == 3);
  CHECK(densctl::calibrate_threshold(b, 76).threshold == 4);
  const double c[] = {0.7, 0.7, 0.7};
  for (double p : {1.0, 20.0, 50.0, 80.0, 99.0}) CHECK(densctl::calibrate_threshold(c, p).threshold == 0.7);
  CHECK_THROWS_AS(densctl::calibrate_threshold(std::span<const double>{}, 50), densctl::Error);
  CHECK_THROWS_AS(densctl::calibrate_threshold(b, 0), densctl::Error);
  CHECK_THROWS_AS(densctl::calibrate_threshold(b, 100), densctl::Error);
  const double five[] = {1, 2, 3, 4, 5};
  CHECK(densctl::calibrate_threshold(five, 20).threshold == 1);
}

TEST_CASE("regressor: constant target is learned") {
  const FeatureSet fs = random_points(400, 2, 21);
  densctl::DensityEstimate est;
  est.densities.assign(400, 1.0);
  est.avg_knn_distances.assign(400, 1.0);
  densctl::RegressorConfig cfg;
  cfg.epochs = 60;
  cfg.seed = 1;
  const auto reg = densctl::train_regressor(fs, est, cfg);
  const FeatureSet held = random_points(200, 2, 22);
  // Fit on the training points; corners of the box hold no data, so held-out
  // points are judged by the median.
  for (double v : densctl::pseudo_density(reg, fs.features)) CHECK(v == doctest::Approx(1.0).epsilon(0.1));
  CHECK(densctl::stats::median(densctl::pseudo_density(reg, held.features)) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("regressor: dense cluster scores above sparse cluster") {
  // 1-D: dense cluster N(0, 0.1) and sparse cluster N(5, 1).
  const auto spec = densctl::SyntheticSpec::isotropic({{0.0}, {5.0}}, {0.1, 1.0}, {0.5, 0.5}, 600, 4);
  const auto data = densctl::generate_synthetic(spec);
  const auto est = densctl::estimate_density(data.features, {10, 1});
  densctl::RegressorConfig cfg;
  cfg.epochs = 150;
  cfg.seed = 2;
  const auto reg = densctl::train_regressor(data.features, est, cfg);

  auto held_spec = spec;
  held_spec.seed = 99;
  held_spec.count = 200;
  const auto held = densctl::generate_synthetic(held_spec);
  const auto pred = densctl::pseudo_density(reg, held.features.features);
  std::vector<double> dense, sparse;
  for (std::size_t i = 0; i < pred.size(); ++i) (held.component[i] == 0 ? dense : sparse).push_back(pred[i]);
  std::size_t wins = 0, pairs = 0;
  for (double a : dense) {
    for (double b : sparse) {
      wins += a > b;
      ++pairs;
    }
  }
  CHECK(static_cast<double>(wins) / static_cast<double>(pairs) >= 0.95);
}

TEST_CASE("regressor: Spearman >= 0.9 against the exact density on a 1,000-point mixture") {
  const auto spec = densctl::SyntheticSpec::benchmark_mixture(1000, 5);
  const auto data = densctl::generate_synthetic(spec);
  const auto est = densctl::estimate_density(data.features, {});
  densctl::RegressorConfig cfg;
  cfg.seed = 3;
  const auto reg = densctl::train_regressor(data.features, est, cfg);
  const auto pred = densctl::pseudo_density(reg, data.features.features);
  CHECK(densctl::stats::spearman(pred, est.densities) >= 0.9);
  MESSAGE("train mse " << reg.stats.train_mse << ", held-out r2 " << reg.stats.heldout_r2);
}

TEST_CASE("pseudo_density: training consistency, totality, shape, gradient") {
  const auto spec = densctl::SyntheticSpec::ring(4, 2.0, 0.3, 400, 8);
  const auto data = densctl::generate_synthetic(spec);
  const auto est = densctl::estimate_density(data.features, {});
  densctl::RegressorConfig cfg;
  cfg.epochs = 80;
  cfg.holdout_fraction = 0.0;
  const auto reg = densctl::train_regressor(data.features, est, cfg);

  const auto pred = densctl::pseudo_density(reg, data.features.features);
  REQUIRE(pred.size() == 400);
  double mse = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) mse += (pred[i] - est.densities[i]) * (pred[i] - est.densities[i]);
  CHECK(mse / 400 == doctest::Approx(reg.stats.train_mse).epsilon(1e-6));

  const Matrix far(1, 2, {1e4f, -1e4f});
  const auto v = densctl::pseudo_density(reg, far);
  CHECK(std::isfinite(v[0]));
  CHECK(densctl::count_extrapolated(reg, far) == 1);
  CHECK(densctl::count_extrapolated(reg, data.features.features) == 0);

  const std::size_t rows[] = {5, 2, 9};
  const Matrix sub = data.features.features.gather_rows(rows);
  const auto sp = densctl::pseudo_density(reg, sub);
  CHECK(sp[0] == pred[5]);
  CHECK(sp[1] == pred[2]);
  CHECK(sp[2] == pred[9]);
  CHECK_THROWS_AS(densctl::pseudo_density(reg, Matrix(1, 3)), densctl::Error);

  // Input gradient vs double-precision central differences.
  const Matrix grad = densctl::pseudo_density_gradient(reg, sub);
  for (std::size_t r = 0; r < sub.rows(); ++r) {
    const auto fd = oracle::central_diff(
        [&](const std::vector<double>& x) { return oracle::forward(reg.net, x)[0]; }, oracle::row(sub, r), 1e-3);
    for (std::size_t j = 0; j < 2; ++j) CHECK(oracle::rel_err(grad(r, j), fd[j], 1e-2) < 1e-2);
  }
}

TEST_CASE("regressor training is deterministic given the seed") {
  const FeatureSet fs = random_points(120, 2, 30);
  const auto est = densctl::estimate_density(fs, {5, 1});
  densctl::RegressorConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 77;
  CHECK(densctl::train_regressor(fs, est, cfg).net == densctl::train_regressor(fs, est, cfg).net);
  densctl::DensityEstimate wrong = est;
  wrong.densities.pop_back();
  CHECK_THROWS_AS(densctl::train_regressor(fs, wrong, cfg), densctl::Error);
}
