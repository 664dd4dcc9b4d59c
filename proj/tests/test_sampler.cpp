#include "doctest.h"

#include <cmath>

#include "densctl/sampler.hpp"
#include "oracle.hpp"

using densctl::Activation;
using densctl::Matrix;
using densctl::Mlp;
using densctl::SamplingConfig;

namespace {

Mlp identity_1d() {
  Mlp net({1, 1}, Activation::Identity, Activation::Identity);
  net.layers()[0].weight(0, 0) = 1.0f;
  return net;
}

// G(z) = z and ρ(x) = x, so ρ ~ N(0, 1) and the fraction below τ is Φ(τ).
const Mlp kGen = identity_1d();
const densctl::DensityRegressor kReg{identity_1d(), {}};

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Φ⁻¹(0.2) and Φ⁻¹(0.8).
constexpr double kQ20 = -0.8416212335729143;
constexpr double kQ80 = 0.8416212335729143;

}  // namespace

TEST_CASE("acceptance rule table") {
  struct Row {
    double rho, tau, w, u;
    bool keep;
  };
  const Row rows[] = {
      {2, 1, 33, 0.99, true},       // above τ, up-weighting: always
      {0, 1, 33, 0.5 / 33, true},   // below τ, u < 1/w
      {0, 1, 33, 1.0 / 33, false},  // u = 1/w is not < 1/w
      {0, 1, 33, 0.5, false},
      {0, 1, 0.03, 0.99, true},     // below τ, down-weighting: always
      {2, 1, 0.03, 0.02, true},     // above τ, u < w
      {2, 1, 0.03, 0.03, false},
      {2, 1, 0.03, 0.5, false},
      {1, 1, 33, 0.5, false},       // ρ = τ goes to the u test on both branches
      {1, 1, 33, 0.01, true},
      {1, 1, 0.03, 0.5, false},
      {1, 1, 0.03, 0.01, true},
      {5, 1, 1, 0.999999, true},    // w = 1 keeps everything
      {-5, 1, 1, 0.0, true},
  };
  for (const auto& r : rows) {
    CAPTURE(r.rho);
    CAPTURE(r.w);
    CAPTURE(r.u);
    CHECK(densctl::accept_sample(r.rho, r.tau, r.w, r.u) == r.keep);
  }
}

TEST_CASE("expected acceptance rate and cost") {
  CHECK(densctl::acceptance_rate(0.2, 33) == doctest::Approx(0.8 + 0.2 / 33));
  CHECK(densctl::acceptance_rate(0.8, 33) == doctest::Approx(0.2 + 0.8 / 33));
  CHECK(densctl::acceptance_rate(0.2, 0.03) == doctest::Approx(0.2 + 0.8 * 0.03));
  CHECK(densctl::acceptance_rate(0.8, 0.03) == doctest::Approx(0.8 + 0.2 * 0.03));
  CHECK(densctl::acceptance_rate(0.5, 1) == 1.0);
  CHECK(densctl::acceptance_rate(0.0, 0.01) == doctest::Approx(0.01));
  CHECK(densctl::acceptance_rate(1.0, 100) == doctest::Approx(0.01));
  // cost multiplier: τ at the 80th percentile, w = 33
  CHECK(1.0 / densctl::acceptance_rate(0.8, 33) == doctest::Approx(1.0 / (0.2 + 0.8 / 33)));
}

TEST_CASE("weights must be positive and finite") {
  for (double w : {0.0, -1.0, std::nan(""), HUGE_VAL}) {
    CHECK_THROWS_AS(densctl::validate_weight(w), densctl::Error);
    CHECK_THROWS_AS(densctl::acceptance_rate(0.5, w), densctl::Error);
    SamplingConfig cfg;
    cfg.weight = w;
    densctl::Rng rng(1);
    CHECK_THROWS_AS(densctl::importance_sample(kGen, kReg, cfg, 4, rng), densctl::Error);
  }
}

TEST_CASE("truncation shrinks toward the mean") {
  const auto z = oracle::from_rows({{3, -1}, {1, 1}});
  const auto about_zero = densctl::truncate_latents(z, {0.5, {}});
  CHECK(about_zero(0, 0) == 1.5f);
  CHECK(about_zero(0, 1) == -0.5f);
  const auto about_mean = densctl::truncate_latents(z, {0.5, {1, 1}});
  CHECK(about_mean(0, 0) == 2.0f);
  CHECK(about_mean(0, 1) == 0.0f);
  CHECK(about_mean(1, 0) == 1.0f);
  CHECK(densctl::truncate_latents(z, {1.0, {}}) == z);
  CHECK(densctl::truncate_latents(z, {0.0, {}}) == Matrix(2, 2));
  CHECK_THROWS_AS(densctl::truncate_latents(z, {0.5, {1, 1, 1}}), densctl::Error);
}

TEST_CASE("w = 1 keeps every attempt") {
  densctl::Rng rng(3);
  SamplingConfig cfg;
  cfg.tau = 0.3;
  const auto b = densctl::importance_sample(kGen, kReg, cfg, 500, rng);
  CHECK(b.attempts == 500);
  CHECK(b.accepted_count() == 500);
  CHECK(b.acceptance_rate() == 1.0);
  CHECK(b.accepted_outputs() == b.outputs);
}

TEST_CASE("batch records are consistent") {
  densctl::Rng rng(4);
  SamplingConfig cfg;
  cfg.tau = kQ80;
  cfg.weight = 33;
  const auto b = densctl::importance_sample(kGen, kReg, cfg, 200, rng);
  CHECK(b.accepted_count() == 200);
  CHECK(b.accepted.back() == 1);  // stops at the K-th accept
  CHECK(b.latents.rows() == b.attempts);
  CHECK(b.densities.size() == b.attempts);
  for (std::size_t i = 0; i < b.attempts; ++i) {
    CHECK(b.outputs(i, 0) == b.latents(i, 0));
    CHECK(b.densities[i] == doctest::Approx(b.latents(i, 0)));
    if (b.densities[i] > cfg.tau) CHECK(b.accepted[i] == 1);
  }
  const auto idx = b.accepted_indices();
  const auto kept = b.accepted_latents();
  for (std::size_t r = 0; r < idx.size(); ++r) CHECK(kept(r, 0) == b.latents(idx[r], 0));
}

TEST_CASE("empirical acceptance rate and reweighting match the law") {
  struct Case {
    double tau, w;
  };
  for (const auto& c : {Case{kQ20, 33}, Case{kQ80, 33}, Case{kQ20, 0.03}, Case{kQ80, 0.03}, Case{0.0, 4}}) {
    CAPTURE(c.tau);
    CAPTURE(c.w);
    densctl::Rng rng(100);
    SamplingConfig cfg;
    cfg.tau = c.tau;
    cfg.weight = c.w;
    const double b = phi_cdf(c.tau);
    const double p = densctl::acceptance_rate(b, c.w);
    // enough accepts for roughly 2·10⁴ attempts
    const auto k = static_cast<std::size_t>(20000 * p);
    const auto batch = densctl::importance_sample(kGen, kReg, cfg, k, rng);
    const double n = static_cast<double>(batch.attempts);
    CHECK(std::abs(batch.acceptance_rate() - p) <= 3 * std::sqrt(p * (1 - p) / n));

    // accepted mass above τ: (1 − b)·a_above / ((1 − b)·a_above + b·a_below)
    const double a_above = c.w > 1 ? 1.0 : c.w;
    const double a_below = c.w > 1 ? 1.0 / c.w : 1.0;
    const double expect = (1 - b) * a_above / ((1 - b) * a_above + b * a_below);
    std::size_t above = 0;
    for (std::size_t i : batch.accepted_indices()) above += batch.densities[i] > c.tau;
    const double frac = static_cast<double>(above) / static_cast<double>(k);
    CHECK(std::abs(frac - expect) <= 3 * std::sqrt(expect * (1 - expect) / static_cast<double>(k)) + 1e-12);
  }
}

TEST_CASE("accepted samples are a subsequence of the unfiltered stream") {
  SamplingConfig plain;
  plain.tau = kQ80;
  SamplingConfig up = plain;
  up.weight = 33;
  SamplingConfig down = plain;
  down.weight = 0.03;
  densctl::Rng r1(9), r2(9), r3(9);
  const auto a = densctl::importance_sample(kGen, kReg, up, 50, r1);
  const auto d = densctl::importance_sample(kGen, kReg, down, 50, r2);
  const auto all = densctl::importance_sample(kGen, kReg, plain, std::max(a.attempts, d.attempts), r3);
  for (std::size_t i = 0; i < a.attempts; ++i) CHECK(a.latents(i, 0) == all.latents(i, 0));
  for (std::size_t i = 0; i < d.attempts; ++i) CHECK(d.latents(i, 0) == all.latents(i, 0));
}

TEST_CASE("same seed, same batch") {
  SamplingConfig cfg;
  cfg.tau = 0.1;
  cfg.weight = 0.2;
  densctl::Rng r1(5), r2(5);
  const auto a = densctl::importance_sample(kGen, kReg, cfg, 300, r1);
  const auto b = densctl::importance_sample(kGen, kReg, cfg, 300, r2);
  CHECK(a.latents == b.latents);
  CHECK(a.accepted == b.accepted);
}

TEST_CASE("truncated sampling applies phi before scoring") {
  SamplingConfig cfg;
  cfg.truncation = densctl::TruncationConfig{0.5, {}};
  densctl::Rng r1(6), r2(6);
  const auto t = densctl::importance_sample(kGen, kReg, cfg, 100, r1);
  const auto u = densctl::importance_sample(kGen, kReg, SamplingConfig{}, 100, r2);
  for (std::size_t i = 0; i < 100; ++i) CHECK(t.latents(i, 0) == 0.5f * u.latents(i, 0));
}

TEST_CASE("starvation raises a typed error") {
  SamplingConfig cfg;
  cfg.tau = -100;  // nothing is below τ
  cfg.weight = 1e-12;
  cfg.max_attempts_per_accept = 50;
  densctl::Rng rng(7);
  try {
    densctl::importance_sample(kGen, kReg, cfg, 1, rng);
    FAIL("expected starvation");
  } catch (const densctl::Error& e) {
    CHECK(e.kind() == densctl::ErrorKind::Starvation);
  }
}

TEST_CASE("sample_latents: shape and moments") {
  densctl::Rng rng(8);
  const auto z = densctl::sample_latents(20000, 3, rng);
  CHECK(z.rows() == 20000);
  CHECK(z.cols() == 3);
  for (std::size_t j = 0; j < 3; ++j) {
    double s = 0, s2 = 0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
      s += z(i, j);
      s2 += double(z(i, j)) * z(i, j);
    }
    const double mean = s / 20000;
    CHECK(std::abs(mean) < 4 / std::sqrt(20000.0));
    CHECK(std::abs(s2 / 20000 - 1) < 0.05);
  }
}
