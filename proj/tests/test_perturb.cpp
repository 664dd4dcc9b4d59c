#include "doctest.h"

#include <cmath>

#include "densctl/perturb.hpp"
#include "oracle.hpp"

using densctl::Activation;
using densctl::Direction;
using densctl::Matrix;
using densctl::Mlp;
using densctl::PerturbConfig;

namespace {

Mlp identity_1d() {
  Mlp net({1, 1}, Activation::Identity, Activation::Identity);
  net.layers()[0].weight(0, 0) = 1.0f;
  return net;
}

// ρ(x) = x.
densctl::DensityRegressor linear_density() { return {identity_1d(), {}}; }

densctl::DensityRegressor random_regressor(std::uint64_t seed) {
  densctl::Rng rng(seed);
  return {Mlp::random({2, 64, 64, 64, 1}, Activation::LeakyRelu, Activation::Identity, rng), {}};
}

Mlp random_generator(std::uint64_t seed) {
  densctl::Rng rng(seed);
  return Mlp::random({2, 64, 64, 2}, Activation::LeakyRelu, Activation::Identity, rng);
}

Matrix normal_latents(std::size_t n, std::size_t d, std::uint64_t seed) {
  densctl::Rng rng(seed);
  Matrix z(n, d);
  for (float& v : z.data()) v = static_cast<float>(rng.normal());
  return z;
}

}  // namespace

TEST_CASE("linear objective: delta grows by alpha per step and saturates at the budget") {
  const auto gen = identity_1d();
  const auto reg = linear_density();
  const float z[] = {0.3f};
  const auto r = densctl::perturb_latent(gen, reg, z, PerturbConfig{});
  REQUIRE(r.delta_norm_trace.size() == 10);
  CHECK(r.delta_norm_trace[0] == doctest::Approx(0.025).epsilon(1e-12));
  CHECK(r.delta_norm_trace[1] == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(r.delta_norm_trace[2] == doctest::Approx(0.075).epsilon(1e-12));
  const std::size_t saturate = static_cast<std::size_t>(std::ceil(0.1 / 0.025));
  for (std::size_t k = 0; k < 10; ++k) {
    if (k + 1 < saturate) CHECK(r.delta_norm_trace[k] < 0.1);
    else CHECK(r.delta_norm_trace[k] == 0.1);
  }
  CHECK(r.delta[0] == 0.1);
  CHECK(r.density_after - r.density_before == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(r.density_trace.size() == 11);
  CHECK(r.density_trace.front() == r.density_before);
  CHECK(r.density_trace.back() == r.density_after);
}

TEST_CASE("saturation step count for the diffusion budget") {
  const auto cfg = PerturbConfig::diffusion();
  CHECK(cfg.steps == 5);
  CHECK(cfg.step_size == 0.0025);
  CHECK(cfg.budget == 0.0125);
  const float z[] = {-1.0f};
  const auto r = densctl::perturb_latent(identity_1d(), linear_density(), z, cfg);
  for (std::size_t k = 0; k < 4; ++k) CHECK(r.delta_norm_trace[k] < cfg.budget);
  CHECK(r.delta_norm_trace[4] == cfg.budget);
}

TEST_CASE("descend mirrors ascend on a linear objective") {
  const float z[] = {1.7f};
  PerturbConfig up, down;
  down.direction = Direction::Descend;
  up.steps = down.steps = 3;  // stay below the budget
  const auto a = densctl::perturb_latent(identity_1d(), linear_density(), z, up);
  const auto d = densctl::perturb_latent(identity_1d(), linear_density(), z, down);
  CHECK(d.delta[0] == -a.delta[0]);
  CHECK(d.density_after < d.density_before);
}

TEST_CASE("zero budget leaves z unchanged") {
  PerturbConfig cfg;
  cfg.budget = 0.0;
  const auto z = normal_latents(8, 2, 3);
  const auto results = densctl::perturb_latents(random_generator(1), random_regressor(2), z, cfg);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(results[i].delta[j] == 0.0);
      CHECK(results[i].final_z[j] == static_cast<double>(z(i, j)));
    }
    CHECK(results[i].density_after == results[i].density_before);
  }
}

TEST_CASE("budget holds after every step and final = original + delta") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    PerturbConfig cfg;
    cfg.step_size = 0.05 * static_cast<double>(seed + 1);  // up to twice the budget per step
    cfg.direction = seed % 2 ? Direction::Descend : Direction::Ascend;
    const auto z = normal_latents(32, 2, 10 + seed);
    for (const auto& r : densctl::perturb_latents(random_generator(seed), random_regressor(seed + 5), z, cfg)) {
      for (double n : r.delta_norm_trace) CHECK(n <= cfg.budget + 1e-7);
      for (std::size_t j = 0; j < 2; ++j) {
        CHECK(std::abs(r.delta[j]) <= cfg.budget + 1e-7);
        CHECK(r.final_z[j] == r.original_z[j] + r.delta[j]);
      }
    }
  }
}

TEST_CASE("batched and single-row runs agree, and reruns are identical") {
  const auto gen = random_generator(4);
  const auto reg = random_regressor(6);
  const auto z = normal_latents(5, 2, 8);
  const auto batch = densctl::perturb_latents(gen, reg, z, {});
  const auto again = densctl::perturb_latents(gen, reg, z, {});
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto one = densctl::perturb_latent(gen, reg, z.row(i), {});
    CHECK(one.delta == batch[i].delta);
    CHECK(one.density_trace == batch[i].density_trace);
    CHECK(again[i].delta == batch[i].delta);
  }
}

TEST_CASE("normalized steps move exactly alpha in L2 before clipping") {
  PerturbConfig cfg;
  cfg.normalize_gradient = true;
  cfg.steps = 1;
  cfg.budget = 10.0;
  const auto z = normal_latents(6, 2, 12);
  for (const auto& r : densctl::perturb_latents(random_generator(2), random_regressor(3), z, cfg)) {
    CHECK(std::hypot(r.delta[0], r.delta[1]) == doctest::Approx(cfg.step_size).epsilon(1e-6));
  }
}

TEST_CASE("latent density gradient matches the chain rule through G and rho") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto gen = random_generator(20 + seed);
    const auto reg = random_regressor(30 + seed);
    const auto z = normal_latents(16, 2, 40 + seed);
    const auto lg = densctl::density_latent_gradient(gen, reg, z);
    double worst_chain = 0, worst_fd = 0;
    std::size_t checked = 0;
    auto f = [&](const std::vector<double>& v) { return oracle::forward(reg.net, oracle::forward(gen, v))[0]; };
    for (std::size_t i = 0; i < z.rows(); ++i) {
      const auto x = oracle::row(z, i);
      // dρ/dz_j = Σ_o dρ/dx_o · dG_o/dz_j
      const auto drho = oracle::input_gradient(reg.net, oracle::forward(gen, x));
      for (std::size_t j = 0; j < 2; ++j) {
        double chain = 0;
        for (std::size_t o = 0; o < 2; ++o) chain += drho[o] * oracle::input_gradient(gen, x, o)[j];
        worst_chain = std::max(worst_chain, oracle::rel_err(lg.gradient(i, j), chain, 1e-2));
      }
      CHECK(lg.density[i] == doctest::Approx(f(x)).epsilon(1e-4));

      const double h = 1e-6;
      const auto base = oracle::pattern(gen, x);
      const auto fd = oracle::central_diff(f, x, h);
      for (std::size_t j = 0; j < 2; ++j) {
        auto up = x, down = x;
        up[j] += h;
        down[j] -= h;
        if (oracle::pattern(gen, up) != base || oracle::pattern(gen, down) != base) continue;
        ++checked;
        worst_fd = std::max(worst_fd, oracle::rel_err(lg.gradient(i, j), fd[j], 1e-2));
      }
    }
    CHECK(worst_chain < 1e-3);
    CHECK(worst_fd < 1e-2);
    CHECK(checked >= 28);
  }
}

TEST_CASE("argument checks") {
  const auto gen = random_generator(1);
  const auto reg = random_regressor(2);
  const auto z = normal_latents(2, 2, 3);
  PerturbConfig bad;
  bad.steps = 0;
  CHECK_THROWS_AS(densctl::perturb_latents(gen, reg, z, bad), densctl::Error);
  bad = {};
  bad.step_size = 0;
  CHECK_THROWS_AS(densctl::perturb_latents(gen, reg, z, bad), densctl::Error);
  bad = {};
  bad.budget = -1;
  CHECK_THROWS_AS(densctl::perturb_latents(gen, reg, z, bad), densctl::Error);
  CHECK_THROWS_AS(densctl::perturb_latents(gen, reg, normal_latents(2, 3, 1), {}), densctl::Error);
  CHECK_THROWS_AS(densctl::perturb_latents(identity_1d(), reg, oracle::column({1}), {}), densctl::Error);
  CHECK(densctl::direction_from_string("descend") == Direction::Descend);
  CHECK_THROWS_AS(densctl::direction_from_string("sideways"), densctl::Error);
}
