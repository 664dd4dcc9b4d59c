#pragma once

#include <cstdint>
#include <vector>

#include "densctl/mlp.hpp"
#include "densctl/optimizer.hpp"
#include "densctl/rng.hpp"
#include "densctl/synthetic.hpp"

namespace densctl {

struct GanArch {
  std::size_t latent_dim = 2;
  std::size_t data_dim = 2;
  std::vector<std::size_t> generator_hidden = {64, 64};
  std::vector<std::size_t> discriminator_hidden = {64, 64};
  Activation activation = Activation::LeakyRelu;
};

struct GanOptimConfig {
  double lr_generator = 1e-4;
  double lr_discriminator = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
};

struct GanLogEntry {
  std::size_t iteration = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double penalty = 0.0;
  /// Mean pseudo density of the accepted generated samples used for the
  /// generator step (fine-tuning only; 0 otherwise).
  double gen_density_mean = 0.0;
  /// Generated attempts needed to fill both filtered batches (fine-tuning only).
  std::size_t gen_attempts = 0;
};

struct GanPair {
  Mlp generator;
  Mlp discriminator;
  OptimizerState opt_generator;
  OptimizerState opt_discriminator;
  std::vector<GanLogEntry> log;

  void reset_optimizers(const GanOptimConfig& cfg);
  /// G and D parameters equal (optimizer state and log ignored).
  bool same_weights(const GanPair& other) const {
    return generator == other.generator && discriminator == other.discriminator;
  }
};

GanPair make_gan(const GanArch& arch, const GanOptimConfig& optim, std::uint64_t seed);
/// Wraps loaded networks, checking that latent and data dims line up.
GanPair make_gan(Mlp generator, Mlp discriminator, const GanOptimConfig& optim);

/// −mean D(real) + mean D(fake) + λ·mean(‖∇ₓD(x̂)‖ − 1)² and its parameter
/// gradient. The penalty gradient is exact only for piecewise-linear D, so a
/// tanh critic is rejected when λ > 0.
struct CriticLoss {
  double loss = 0.0;
  double wasserstein = 0.0;  // mean D(real) − mean D(fake)
  double penalty = 0.0;      // λ-weighted
  Gradients grads;
};
CriticLoss critic_loss(const Mlp& d, const Matrix& real, const Matrix& fake, const Matrix& interpolates,
                       double penalty_coef);

/// x̂_i = e_i·real_i + (1 − e_i)·fake_i, e_i ~ U(0, 1).
Matrix interpolate(const Matrix& real, const Matrix& fake, Rng& rng);

/// −mean D(G(z)) and the generator parameter gradient.
struct GeneratorLoss {
  double loss = 0.0;
  Gradients grads;
};
GeneratorLoss generator_loss(const Mlp& g, const Mlp& d, const Matrix& z);

struct PretrainConfig {
  std::size_t iterations = 1500;
  std::size_t batch_size = 64;
  /// Critic steps per generator step.
  std::size_t n_critic = 5;
  double penalty_coef = 0.1;
  GanOptimConfig optim;
  std::uint64_t seed = 0;
};

/// WGAN training from scratch on `data`. iterations = 0 returns the
/// initialized pair.
GanPair pretrain_gan(const Matrix& data, const GanArch& arch, const PretrainConfig& cfg);
/// Draws spec.count training points from the spec, then pretrains.
GanPair pretrain_toy_gan(const SyntheticSpec& spec, const GanArch& arch, const PretrainConfig& cfg);

/// Fréchet distance the default pretraining reaches against a held-out draw
/// of the benchmark mixture (worst of six seeds was 0.137).
inline constexpr double kBenchmarkFidBaseline = 0.2;

/// count generated samples from standard normal latents.
Matrix generate(const Mlp& generator, std::size_t count, Rng& rng);

}  // namespace densctl
