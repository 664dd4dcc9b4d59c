#include "densctl/gan.hpp"

#include <cmath>
#include <string>

#include "densctl/sampler.hpp"

namespace densctl {

namespace {

Gradients add(Gradients a, const Gradients& b) {
  a.add_scaled(b, 1.0f);
  return a;
}

}  // namespace

void GanPair::reset_optimizers(const GanOptimConfig& cfg) {
  opt_generator = OptimizerState(generator, {OptimizerKind::Adam, cfg.lr_generator, cfg.beta1, cfg.beta2, 1e-8});
  opt_discriminator =
      OptimizerState(discriminator, {OptimizerKind::Adam, cfg.lr_discriminator, cfg.beta1, cfg.beta2, 1e-8});
}

GanPair make_gan(const GanArch& arch, const GanOptimConfig& optim, std::uint64_t seed) {
  require(arch.latent_dim >= 1 && arch.data_dim >= 1, ErrorKind::InvalidArgument, "gan: dims must be >= 1");
  Rng rng(seed);
  std::vector<std::size_t> gs{arch.latent_dim};
  gs.insert(gs.end(), arch.generator_hidden.begin(), arch.generator_hidden.end());
  gs.push_back(arch.data_dim);
  std::vector<std::size_t> ds{arch.data_dim};
  ds.insert(ds.end(), arch.discriminator_hidden.begin(), arch.discriminator_hidden.end());
  ds.push_back(1);
  Mlp g = Mlp::random(gs, arch.activation, Activation::Identity, rng);
  Mlp d = Mlp::random(ds, arch.activation, Activation::Identity, rng);
  return make_gan(std::move(g), std::move(d), optim);
}

GanPair make_gan(Mlp generator, Mlp discriminator, const GanOptimConfig& optim) {
  require(generator.output_dim() == discriminator.input_dim(), ErrorKind::DimensionMismatch,
          "gan: generator output dim " + std::to_string(generator.output_dim()) +
              " != discriminator input dim " + std::to_string(discriminator.input_dim()));
  require(discriminator.output_dim() == 1, ErrorKind::DimensionMismatch, "gan: discriminator must have one output");
  GanPair pair;
  pair.generator = std::move(generator);
  pair.discriminator = std::move(discriminator);
  pair.reset_optimizers(optim);
  return pair;
}

Matrix interpolate(const Matrix& real, const Matrix& fake, Rng& rng) {
  require_same_shape(real, fake, "interpolate");
  Matrix out(real.rows(), real.cols());
  for (std::size_t i = 0; i < real.rows(); ++i) {
    const double e = rng.uniform();
    for (std::size_t j = 0; j < real.cols(); ++j)
      out(i, j) = static_cast<float>(e * real(i, j) + (1.0 - e) * fake(i, j));
  }
  return out;
}

CriticLoss critic_loss(const Mlp& d, const Matrix& real, const Matrix& fake, const Matrix& interpolates,
                       double penalty_coef) {
  require(real.rows() >= 1 && fake.rows() >= 1, ErrorKind::InvalidArgument, "critic loss: empty batch");
  require(penalty_coef >= 0.0, ErrorKind::InvalidArgument, "critic loss: penalty coefficient must be >= 0");
  CriticLoss out;
  ForwardCache cr, cf;
  const Matrix dr = d.forward(real, cr);
  const Matrix df = d.forward(fake, cf);
  double mr = 0.0, mf = 0.0;
  for (float v : dr.data()) mr += v;
  for (float v : df.data()) mf += v;
  mr /= static_cast<double>(real.rows());
  mf /= static_cast<double>(fake.rows());
  out.wasserstein = mr - mf;
  out.grads = add(d.backward(cr, Matrix(real.rows(), 1, static_cast<float>(-1.0 / static_cast<double>(real.rows())))),
                  d.backward(cf, Matrix(fake.rows(), 1, static_cast<float>(1.0 / static_cast<double>(fake.rows())))));

  if (penalty_coef > 0.0) {
    for (std::size_t l = 0; l < d.layer_count(); ++l) {
      require(is_piecewise_linear(d.activation_of(l)), ErrorKind::InvalidArgument,
              "critic loss: gradient penalty needs a piecewise-linear discriminator");
    }
    const std::size_t b = interpolates.rows();
    require(b >= 1 && interpolates.cols() == d.input_dim(), ErrorKind::DimensionMismatch,
            "critic loss: interpolate batch shape mismatch");
    ForwardCache ci;
    d.forward(interpolates, ci);
    const std::size_t layers = d.layer_count();

    // Backward with unit output gradient, keeping each layer's delta.
    std::vector<Matrix> deltas(layers);
    Matrix delta(b, 1, 1.0f);
    for (std::size_t l = layers; l-- > 0;) {
      apply_activation_grad(d.activation_of(l), ci.preactivations[l].data(), delta.data());
      deltas[l] = delta;
      delta = matmul_nt(delta, d.layers()[l].weight);
    }
    const Matrix& g = delta;  // ∇ₓD per row

    // v_i = ∂P/∂g_i with P = λ/B Σ (‖g_i‖ − 1)².
    Matrix v(b, g.cols());
    double pen = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      double norm = 0.0;
      for (float x : g.row(i)) norm += static_cast<double>(x) * x;
      norm = std::sqrt(norm);
      pen += (norm - 1.0) * (norm - 1.0);
      const double c = norm > 0.0 ? 2.0 * penalty_coef / static_cast<double>(b) * (norm - 1.0) / norm : 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) v(i, j) = static_cast<float>(c * g(i, j));
    }
    out.penalty = penalty_coef * pen / static_cast<double>(b);

    // With activation patterns frozen, g is linear in each weight matrix:
    // dP/dW_l = A_lᵀ·delta_l with A_1 = V and A_{l+1} = σ'_l ⊙ (A_l·W_l).
    // Biases only move the (locally constant) patterns, so their gradient is 0.
    Gradients pg = d.zero_gradients();
    Matrix a = v;
    for (std::size_t l = 0; l < layers; ++l) {
      pg.weight[l] = matmul_tn(a, deltas[l]);
      if (l + 1 < layers) {
        a = matmul(a, d.layers()[l].weight);
        apply_activation_grad(d.activation_of(l), ci.preactivations[l].data(), a.data());
      }
    }
    out.grads.add_scaled(pg, 1.0f);
  }
  out.loss = -out.wasserstein + out.penalty;
  return out;
}

GeneratorLoss generator_loss(const Mlp& g, const Mlp& d, const Matrix& z) {
  require(z.rows() >= 1, ErrorKind::InvalidArgument, "generator loss: empty batch");
  ForwardCache cg, cd;
  const Matrix x = g.forward(z, cg);
  const Matrix dx = d.forward(x, cd);
  GeneratorLoss out;
  double m = 0.0;
  for (float v : dx.data()) m += v;
  out.loss = -m / static_cast<double>(z.rows());
  const Gradients gd = d.backward(cd, Matrix(z.rows(), 1, static_cast<float>(-1.0 / static_cast<double>(z.rows()))));
  out.grads = g.backward(cg, gd.input);
  return out;
}

Matrix generate(const Mlp& generator, std::size_t count, Rng& rng) {
  return generator.predict(sample_latents(count, generator.input_dim(), rng));
}

GanPair pretrain_gan(const Matrix& data, const GanArch& arch, const PretrainConfig& cfg) {
  require(data.cols() == arch.data_dim, ErrorKind::DimensionMismatch,
          "pretrain: data dim " + std::to_string(data.cols()) + " != arch data dim " + std::to_string(arch.data_dim));
  require(cfg.batch_size >= 1 && cfg.n_critic >= 1, ErrorKind::InvalidArgument,
          "pretrain: batch size and critic steps must be >= 1");
  require(cfg.iterations == 0 || data.rows() >= 1, ErrorKind::InvalidArgument, "pretrain: no training data");
  require(data.all_finite(), ErrorKind::NonFinite, "pretrain: non-finite training data");
  GanPair pair = make_gan(arch, cfg.optim, cfg.seed);
  Rng rng = Rng(cfg.seed).split(1);
  std::vector<std::size_t> rows(cfg.batch_size);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    GanLogEntry entry;
    entry.iteration = it;
    try {
      for (std::size_t c = 0; c < cfg.n_critic; ++c) {
        for (auto& r : rows) r = rng.below(data.rows());
        const Matrix real = data.gather_rows(rows);
        const Matrix fake = generate(pair.generator, cfg.batch_size, rng);
        const Matrix mix = interpolate(real, fake, rng);
        const CriticLoss cl = critic_loss(pair.discriminator, real, fake, mix, cfg.penalty_coef);
        if (!std::isfinite(cl.loss) || !cl.grads.all_finite())
          fail(ErrorKind::Divergence, "pretrain: critic loss diverged at iteration " + std::to_string(it));
        pair.opt_discriminator.step(pair.discriminator, cl.grads);
        entry.d_loss = cl.loss;
        entry.penalty = cl.penalty;
      }
      const GeneratorLoss gl = generator_loss(pair.generator, pair.discriminator,
                                              sample_latents(cfg.batch_size, arch.latent_dim, rng));
      if (!std::isfinite(gl.loss) || !gl.grads.all_finite())
        fail(ErrorKind::Divergence, "pretrain: generator loss diverged at iteration " + std::to_string(it));
      pair.opt_generator.step(pair.generator, gl.grads);
      entry.g_loss = gl.loss;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFinite) throw;
      fail(ErrorKind::Divergence, "pretrain: diverged at iteration " + std::to_string(it) + " (" + e.what() + ")");
    }
    pair.log.push_back(entry);
  }
  return pair;
}

GanPair pretrain_toy_gan(const SyntheticSpec& spec, const GanArch& arch, const PretrainConfig& cfg) {
  return pretrain_gan(generate_synthetic(spec).features.features, arch, cfg);
}

}  // namespace densctl
