#include "densctl/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace densctl {

Matrix truncate_latents(const Matrix& z, const TruncationConfig& cfg) {
  require(cfg.phi >= 0.0 && std::isfinite(cfg.phi), ErrorKind::InvalidArgument, "truncation: phi must be >= 0");
  require(cfg.latent_mean.empty() || cfg.latent_mean.size() == z.cols(), ErrorKind::DimensionMismatch,
          "truncation: mean dim " + std::to_string(cfg.latent_mean.size()) + " != latent dim " +
              std::to_string(z.cols()));
  if (cfg.phi == 1.0) return z;
  Matrix out(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t j = 0; j < z.cols(); ++j) {
      const double m = cfg.latent_mean.empty() ? 0.0 : cfg.latent_mean[j];
      out(i, j) = static_cast<float>(m + cfg.phi * (z(i, j) - m));
    }
  }
  return out;
}

void validate_weight(double w) {
  require(w > 0.0 && std::isfinite(w), ErrorKind::InvalidArgument,
          "importance weight must be finite and > 0 (got " + std::to_string(w) + ")");
}

bool accept_sample(double rho, double tau, double w, double u) {
  if (w > 1.0) return rho > tau || u < 1.0 / w;
  return rho < tau || u < w;
}

double acceptance_rate(double fraction_below, double w) {
  require(fraction_below >= 0.0 && fraction_below <= 1.0, ErrorKind::InvalidArgument,
          "acceptance_rate: fraction must be in [0, 1]");
  validate_weight(w);
  if (w > 1.0) return (1.0 - fraction_below) + fraction_below / w;
  return fraction_below + (1.0 - fraction_below) * w;
}

std::size_t SampleBatch::accepted_count() const {
  return static_cast<std::size_t>(std::count(accepted.begin(), accepted.end(), std::uint8_t{1}));
}

std::vector<std::size_t> SampleBatch::accepted_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < accepted.size(); ++i)
    if (accepted[i]) idx.push_back(i);
  return idx;
}

Matrix SampleBatch::accepted_outputs() const { return outputs.gather_rows(accepted_indices()); }
Matrix SampleBatch::accepted_latents() const { return latents.gather_rows(accepted_indices()); }

double SampleBatch::acceptance_rate() const {
  return attempts == 0 ? 0.0 : static_cast<double>(accepted_count()) / static_cast<double>(attempts);
}

Matrix sample_latents(std::size_t count, std::size_t dim, Rng& rng) {
  Matrix z(count, dim);
  for (float& v : z.data()) v = static_cast<float>(rng.normal());
  return z;
}

SampleBatch importance_sample(const Mlp& gen, const DensityRegressor& reg, const SamplingConfig& cfg,
                              std::size_t count, Rng& rng) {
  require(count >= 1, ErrorKind::InvalidArgument, "sample: count must be >= 1");
  validate_weight(cfg.weight);
  require(cfg.max_attempts_per_accept >= 1, ErrorKind::InvalidArgument, "sample: max attempts must be >= 1");
  require(gen.output_dim() == reg.input_dim(), ErrorKind::DimensionMismatch,
          "sample: generator output dim " + std::to_string(gen.output_dim()) + " != regressor input dim " +
              std::to_string(reg.input_dim()));

  const std::size_t dz = gen.input_dim();
  SampleBatch batch;
  batch.latents = Matrix(0, dz);
  batch.outputs = Matrix(0, gen.output_dim());
  std::size_t kept = 0, since_accept = 0;
  std::vector<double> u;
  while (kept < count) {
    // Chunk size only affects throughput; decisions are made in attempt order.
    const double rate = acceptance_rate(0.5, cfg.weight);
    const std::size_t chunk =
        std::clamp<std::size_t>(static_cast<std::size_t>(static_cast<double>(count - kept) / rate) + 16, 16, 4096);
    Matrix z(chunk, dz);
    u.resize(chunk);
    for (std::size_t i = 0; i < chunk; ++i) {
      for (float& v : z.row(i)) v = static_cast<float>(rng.normal());
      u[i] = rng.uniform();
    }
    if (cfg.truncation) z = truncate_latents(z, *cfg.truncation);
    const Matrix x = gen.predict(z);
    const std::vector<double> rho = pseudo_density(reg, x);
    for (std::size_t i = 0; i < chunk && kept < count; ++i) {
      const bool ok = accept_sample(rho[i], cfg.tau, cfg.weight, u[i]);
      batch.latents.append_row(z.row(i));
      batch.outputs.append_row(x.row(i));
      batch.densities.push_back(rho[i]);
      batch.accepted.push_back(ok ? 1 : 0);
      ++batch.attempts;
      if (ok) {
        ++kept;
        since_accept = 0;
      } else if (++since_accept >= cfg.max_attempts_per_accept) {
        fail(ErrorKind::Starvation, "sample: " + std::to_string(since_accept) +
                                        " consecutive rejections (tau=" + std::to_string(cfg.tau) +
                                        ", w=" + std::to_string(cfg.weight) + ")");
      }
    }
  }
  return batch;
}

}  // namespace densctl
