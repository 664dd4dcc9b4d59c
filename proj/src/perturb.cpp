#include "densctl/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace densctl {

const char* to_string(Direction d) { return d == Direction::Ascend ? "ascend" : "descend"; }

Direction direction_from_string(std::string_view name) {
  if (name == "ascend") return Direction::Ascend;
  if (name == "descend") return Direction::Descend;
  fail(ErrorKind::InvalidArgument, "unknown direction '" + std::string(name) + "' (expected ascend|descend)");
}

LatentGradient density_latent_gradient(const Mlp& gen, const DensityRegressor& reg, const Matrix& z) {
  require(gen.output_dim() == reg.input_dim(), ErrorKind::DimensionMismatch,
          "perturb: generator output dim " + std::to_string(gen.output_dim()) + " != regressor input dim " +
              std::to_string(reg.input_dim()));
  ForwardCache gen_cache, reg_cache;
  const Matrix x = gen.forward(z, gen_cache);
  const Matrix rho = reg.net.forward(x, reg_cache);
  // Rows do not interact, so d(Σρ)/dz gives every row's own gradient.
  const Matrix ones(z.rows(), 1, 1.0f);
  const Gradients gx = reg.net.backward(reg_cache, ones);
  LatentGradient out;
  out.gradient = gen.backward(gen_cache, gx.input).input;
  out.density.resize(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) out.density[i] = rho(i, 0);
  return out;
}

std::vector<PerturbResult> perturb_latents(const Mlp& gen, const DensityRegressor& reg, const Matrix& z,
                                           const PerturbConfig& cfg) {
  require(cfg.steps >= 1, ErrorKind::InvalidArgument, "perturb: steps must be >= 1");
  require(cfg.step_size > 0.0 && std::isfinite(cfg.step_size), ErrorKind::InvalidArgument,
          "perturb: step size must be > 0");
  require(cfg.budget >= 0.0 && std::isfinite(cfg.budget), ErrorKind::InvalidArgument,
          "perturb: budget must be >= 0");
  require(z.cols() == gen.input_dim(), ErrorKind::DimensionMismatch,
          "perturb: latent dim " + std::to_string(z.cols()) + " != generator input dim " +
              std::to_string(gen.input_dim()));
  require(z.all_finite(), ErrorKind::NonFinite, "perturb: non-finite latent");

  const std::size_t n = z.rows(), d = z.cols();
  const double sign = cfg.direction == Direction::Ascend ? 1.0 : -1.0;
  std::vector<PerturbResult> results(n);
  std::vector<double> delta(n * d, 0.0);
  Matrix input = z;

  LatentGradient lg = density_latent_gradient(gen, reg, input);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = results[i];
    r.original_z.assign(z.row(i).begin(), z.row(i).end());
    r.density_before = lg.density[i];
    r.density_trace.push_back(lg.density[i]);
  }

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    if (!lg.gradient.all_finite()) {
      std::ostringstream msg;
      msg << "perturb: non-finite gradient at step " << step << "; density trace of row 0:";
      for (double v : results.front().density_trace) msg << ' ' << v;
      fail(ErrorKind::NonFinite, msg.str());
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto g = lg.gradient.row(i);
      double scale = cfg.step_size * sign;
      if (cfg.normalize_gradient) {
        double norm = 0.0;
        for (float v : g) norm += static_cast<double>(v) * v;
        norm = std::sqrt(norm);
        scale = norm > 0.0 ? scale / norm : 0.0;
      }
      double inf_norm = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        double& dj = delta[i * d + j];
        dj = std::clamp(dj + scale * g[j], -cfg.budget, cfg.budget);
        input(i, j) = static_cast<float>(static_cast<double>(z(i, j)) + dj);
        inf_norm = std::max(inf_norm, std::abs(dj));
      }
      results[i].delta_norm_trace.push_back(inf_norm);
    }
    lg = density_latent_gradient(gen, reg, input);
    for (std::size_t i = 0; i < n; ++i) results[i].density_trace.push_back(lg.density[i]);
  }

  for (std::size_t i = 0; i < n; ++i) {
    auto& r = results[i];
    r.delta.assign(delta.begin() + static_cast<std::ptrdiff_t>(i * d),
                   delta.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    r.final_z.resize(d);
    for (std::size_t j = 0; j < d; ++j) r.final_z[j] = r.original_z[j] + r.delta[j];
    r.density_after = r.density_trace.back();
  }
  return results;
}

PerturbResult perturb_latent(const Mlp& gen, const DensityRegressor& reg, std::span<const float> z,
                             const PerturbConfig& cfg) {
  Matrix m(1, z.size(), std::vector<float>(z.begin(), z.end()));
  return perturb_latents(gen, reg, m, cfg).front();
}

}  // namespace densctl
