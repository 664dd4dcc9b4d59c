#include "densctl/finetune.hpp"

#include <cmath>
#include <string>

namespace densctl {

WeightedDataset::WeightedDataset(Matrix samples, std::vector<double> densities, double tau, double weight)
    : samples_(std::move(samples)), densities_(std::move(densities)), tau_(tau), weight_(weight) {
  require(samples_.rows() >= 1, ErrorKind::InvalidArgument, "weighted dataset: no samples");
  require(densities_.size() == samples_.rows(), ErrorKind::DimensionMismatch,
          "weighted dataset: " + std::to_string(densities_.size()) + " densities for " +
              std::to_string(samples_.rows()) + " samples");
  validate_weight(weight_);
  require(std::isfinite(tau_), ErrorKind::InvalidArgument, "weighted dataset: threshold must be finite");
  for (double d : densities_) require(std::isfinite(d), ErrorKind::NonFinite, "weighted dataset: non-finite density");
}

double WeightedDataset::acceptance_probability(std::size_t i) const {
  const double rho = densities_.at(i);
  if (weight_ > 1.0) return rho > tau_ ? 1.0 : 1.0 / weight_;
  return rho < tau_ ? 1.0 : weight_;
}

std::vector<double> WeightedDataset::sampling_distribution() const {
  std::vector<double> p(size());
  double total = 0.0;
  for (std::size_t i = 0; i < size(); ++i) total += p[i] = acceptance_probability(i);
  for (double& v : p) v /= total;
  return p;
}

std::vector<std::size_t> WeightedDataset::sample_indices(std::size_t count, Rng& rng,
                                                         std::size_t max_attempts_per_accept) const {
  std::vector<std::size_t> out;
  out.reserve(count);
  std::size_t since_accept = 0;
  while (out.size() < count) {
    const std::size_t i = static_cast<std::size_t>(rng.below(size()));
    const double u = rng.uniform();
    if (accept_sample(densities_[i], tau_, weight_, u)) {
      out.push_back(i);
      since_accept = 0;
    } else if (++since_accept >= max_attempts_per_accept) {
      fail(ErrorKind::Starvation, "weighted dataset: " + std::to_string(since_accept) + " consecutive rejections");
    }
  }
  return out;
}

Matrix WeightedDataset::sample_batch(std::size_t count, Rng& rng, std::size_t max_attempts_per_accept) const {
  return samples_.gather_rows(sample_indices(count, rng, max_attempts_per_accept));
}

GanPair finetune_gan(GanPair pair, const DensityRegressor& reg, const WeightedDataset& real,
                     const FinetuneConfig& cfg) {
  require(cfg.batch_size >= 1, ErrorKind::InvalidArgument, "finetune: batch size must be >= 1");
  validate_weight(cfg.weight);
  require(real.tau() == cfg.tau && real.weight() == cfg.weight, ErrorKind::InvalidArgument,
          "finetune: dataset (tau, w) differ from the config");
  require(real.samples().cols() == pair.discriminator.input_dim(), ErrorKind::DimensionMismatch,
          "finetune: data dim " + std::to_string(real.samples().cols()) + " != discriminator input dim " +
              std::to_string(pair.discriminator.input_dim()));
  pair.reset_optimizers(cfg.optim);
  pair.log.clear();
  Rng rng = Rng(cfg.seed).split(2);
  const SamplingConfig gen_filter{cfg.tau, 1.0 / cfg.weight, cfg.max_attempts_per_accept, std::nullopt};

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const Matrix x = real.sample_batch(cfg.batch_size, rng, cfg.max_attempts_per_accept);
    const std::string where = " at iteration " + std::to_string(it);

    CriticLoss cl;
    SampleBatch for_g;
    std::size_t attempts = 0;
    try {
      const SampleBatch for_d = importance_sample(pair.generator, reg, gen_filter, cfg.batch_size, rng);
      const Matrix fake = for_d.accepted_outputs();
      const Matrix mix = interpolate(x, fake, rng);
      cl = critic_loss(pair.discriminator, x, fake, mix, cfg.penalty_coef);
      for_g = importance_sample(pair.generator, reg, gen_filter, cfg.batch_size, rng);
      attempts = for_d.attempts + for_g.attempts;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFinite) throw;
      throw DivergenceError("finetune: critic pass diverged" + where + ": " + e.what(), pair);
    }
    if (!std::isfinite(cl.loss) || !cl.grads.all_finite())
      throw DivergenceError("finetune: critic loss diverged" + where, pair);

    Mlp d_before = pair.discriminator;
    OptimizerState opt_before = pair.opt_discriminator;
    pair.opt_discriminator.step(pair.discriminator, cl.grads);
    GeneratorLoss gl;
    bool finite = true;
    try {
      gl = generator_loss(pair.generator, pair.discriminator, for_g.accepted_latents());
      finite = std::isfinite(gl.loss) && gl.grads.all_finite();
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFinite) throw;
      finite = false;
    }
    if (!finite) {
      pair.discriminator = std::move(d_before);
      pair.opt_discriminator = std::move(opt_before);
      throw DivergenceError("finetune: generator loss diverged" + where, pair);
    }
    pair.opt_generator.step(pair.generator, gl.grads);

    GanLogEntry entry;
    entry.iteration = it;
    entry.d_loss = cl.loss;
    entry.g_loss = gl.loss;
    entry.penalty = cl.penalty;
    double m = 0.0;
    for (std::size_t i : for_g.accepted_indices()) m += for_g.densities[i];
    entry.gen_density_mean = m / static_cast<double>(cfg.batch_size);
    entry.gen_attempts = attempts;
    pair.log.push_back(entry);
  }
  return pair;
}

TwoBin equilibrium_target(TwoBin real, double w) {
  validate_weight(w);
  const double total = real.above + real.below;
  require(real.above >= 0.0 && real.below >= 0.0 && total > 0.0, ErrorKind::InvalidArgument,
          "equilibrium: masses must be non-negative with positive total");
  const double a = real.above / total;
  const double num = w * w * a;
  const double g = num / (num + (1.0 - a));
  return {g, 1.0 - g};
}

}  // namespace densctl
