#include "densctl/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "densctl/rng.hpp"

namespace densctl {
namespace {

constexpr std::size_t kMoonQuadrature = 2048;

// Lower-triangular Cholesky factor of a D×D row-major SPD matrix.
std::vector<double> cholesky(const std::vector<double>& a, std::size_t d) {
  std::vector<double> l(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * d + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * d + k] * l[j * d + k];
      if (i == j) {
        require(s > 0.0, ErrorKind::InvalidArgument, "synthetic: covariance is not positive definite");
        l[i * d + i] = std::sqrt(s);
      } else {
        l[i * d + j] = s / l[j * d + j];
      }
    }
  }
  return l;
}

struct PreparedComponent {
  std::vector<double> mean;
  std::vector<double> chol;
  double log_norm = 0.0;  // log of (2π)^{-D/2} |Σ|^{-1/2}
  double weight = 0.0;
};

std::vector<PreparedComponent> prepare(const SyntheticSpec& spec) {
  const std::size_t d = spec.dim();
  double total = 0.0;
  for (const auto& c : spec.components) total += c.weight;
  std::vector<PreparedComponent> out;
  for (const auto& c : spec.components) {
    PreparedComponent p;
    p.mean = c.mean;
    p.chol = cholesky(c.covariance, d);
    double log_det = 0.0;
    for (std::size_t i = 0; i < d; ++i) log_det += 2.0 * std::log(p.chol[i * d + i]);
    p.log_norm = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi) - 0.5 * log_det;
    p.weight = c.weight / total;
    out.push_back(std::move(p));
  }
  return out;
}

double gaussian_density(const PreparedComponent& c, std::span<const float> x) {
  const std::size_t d = c.mean.size();
  // Solve L y = (x - μ); quadratic form is |y|².
  std::vector<double> y(d);
  double q = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double s = static_cast<double>(x[i]) - c.mean[i];
    for (std::size_t k = 0; k < i; ++k) s -= c.chol[i * d + k] * y[k];
    y[i] = s / c.chol[i * d + i];
    q += y[i] * y[i];
  }
  return std::exp(c.log_norm - 0.5 * q);
}

void moon_point(int moon, double t, double& x, double& y) {
  if (moon == 0) {
    x = std::cos(t);
    y = std::sin(t);
  } else {
    x = 1.0 - std::cos(t);
    y = 0.5 - std::sin(t);
  }
}

}  // namespace

const char* to_string(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::GaussianMixture: return "gaussian-mixture";
    case SyntheticKind::Ring: return "ring";
    case SyntheticKind::TwoMoons: return "two-moons";
  }
  return "?";
}

SyntheticKind synthetic_kind_from_string(const std::string& s) {
  if (s == "gaussian-mixture") return SyntheticKind::GaussianMixture;
  if (s == "ring") return SyntheticKind::Ring;
  if (s == "two-moons") return SyntheticKind::TwoMoons;
  fail(ErrorKind::InvalidArgument, "unknown synthetic kind '" + s + "'");
}

std::size_t SyntheticSpec::dim() const {
  if (kind == SyntheticKind::TwoMoons) return 2;
  return components.empty() ? 0 : components.front().mean.size();
}

SyntheticSpec SyntheticSpec::ring(std::size_t modes, double radius, double sigma, std::size_t count,
                                  std::uint64_t seed) {
  SyntheticSpec s;
  s.kind = SyntheticKind::Ring;
  s.count = count;
  s.seed = seed;
  for (std::size_t m = 0; m < modes; ++m) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(modes);
    s.components.push_back({{radius * std::cos(angle), radius * std::sin(angle)},
                            {sigma * sigma, 0.0, 0.0, sigma * sigma},
                            1.0 / static_cast<double>(modes)});
  }
  return s;
}

SyntheticSpec SyntheticSpec::benchmark_mixture(std::size_t count, std::uint64_t seed) {
  return isotropic({{0.0, 0.0}, {1.2, 0.0}, {-0.6, 1.0}, {-0.6, -1.0}}, {0.35, 0.5, 0.5, 0.6},
                   {0.4, 0.2, 0.2, 0.2}, count, seed);
}

SyntheticSpec SyntheticSpec::two_moons(double noise, std::size_t count, std::uint64_t seed) {
  SyntheticSpec s;
  s.kind = SyntheticKind::TwoMoons;
  s.moon_noise = noise;
  s.count = count;
  s.seed = seed;
  return s;
}

SyntheticSpec SyntheticSpec::isotropic(std::vector<std::vector<double>> means, std::vector<double> sigmas,
                                       std::vector<double> weights, std::size_t count,
                                       std::uint64_t seed) {
  require(means.size() == sigmas.size() && means.size() == weights.size(), ErrorKind::InvalidArgument,
          "synthetic: means, sigmas and weights must have equal length");
  SyntheticSpec s;
  s.kind = SyntheticKind::GaussianMixture;
  s.count = count;
  s.seed = seed;
  for (std::size_t c = 0; c < means.size(); ++c) {
    const std::size_t d = means[c].size();
    std::vector<double> cov(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) cov[i * d + i] = sigmas[c] * sigmas[c];
    s.components.push_back({std::move(means[c]), std::move(cov), weights[c]});
  }
  return s;
}

void validate(const SyntheticSpec& spec) {
  if (spec.kind == SyntheticKind::TwoMoons) {
    require(spec.moon_noise > 0.0, ErrorKind::InvalidArgument, "synthetic: two-moons noise must be > 0");
    return;
  }
  require(!spec.components.empty(), ErrorKind::InvalidArgument, "synthetic: no mixture components");
  const std::size_t d = spec.dim();
  require(d >= 1, ErrorKind::InvalidArgument, "synthetic: zero-dimensional components");
  double total = 0.0;
  for (const auto& c : spec.components) {
    require(c.mean.size() == d && c.covariance.size() == d * d, ErrorKind::InvalidArgument,
            "synthetic: inconsistent component dimensions");
    require(c.weight > 0.0, ErrorKind::InvalidArgument, "synthetic: mixture weights must be > 0");
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        require(c.covariance[i * d + j] == c.covariance[j * d + i], ErrorKind::InvalidArgument,
                "synthetic: covariance is not symmetric");
      }
    }
    cholesky(c.covariance, d);
    total += c.weight;
  }
  require(std::abs(total - 1.0) < 1e-9, ErrorKind::InvalidArgument, "synthetic: mixture weights must sum to 1");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  const std::size_t d = spec.dim();
  SyntheticData out;
  out.features.source_tag = std::string("synthetic:") + to_string(spec.kind) + ":seed=" + std::to_string(spec.seed);
  out.features.features = Matrix(spec.count, d);
  out.component.resize(spec.count);
  Rng rng(spec.seed);

  if (spec.kind == SyntheticKind::TwoMoons) {
    for (std::size_t i = 0; i < spec.count; ++i) {
      const int moon = rng.uniform() < 0.5 ? 0 : 1;
      const double t = std::numbers::pi * rng.uniform();
      double x = 0.0, y = 0.0;
      moon_point(moon, t, x, y);
      out.features.features(i, 0) = static_cast<float>(x + spec.moon_noise * rng.normal());
      out.features.features(i, 1) = static_cast<float>(y + spec.moon_noise * rng.normal());
      out.component[i] = static_cast<std::uint32_t>(moon);
    }
  } else {
    const auto comps = prepare(spec);
    std::vector<double> z(d);
    for (std::size_t i = 0; i < spec.count; ++i) {
      const double u = rng.uniform();
      std::size_t c = 0;
      double acc = comps[0].weight;
      while (u >= acc && c + 1 < comps.size()) acc += comps[++c].weight;
      for (auto& v : z) v = rng.normal();
      for (std::size_t r = 0; r < d; ++r) {
        double v = comps[c].mean[r];
        for (std::size_t k = 0; k <= r; ++k) v += comps[c].chol[r * d + k] * z[k];
        out.features.features(i, r) = static_cast<float>(v);
      }
      out.component[i] = static_cast<std::uint32_t>(c);
    }
  }
  out.true_density = analytic_density(spec, out.features.features);
  return out;
}

std::vector<double> analytic_density(const SyntheticSpec& spec, const Matrix& points) {
  validate(spec);
  require(points.rows() == 0 || points.cols() == spec.dim(), ErrorKind::DimensionMismatch,
          "analytic_density: point dimension mismatch");
  std::vector<double> out(points.rows(), 0.0);
  if (spec.kind == SyntheticKind::TwoMoons) {
    // Each moon: arc parameter uniform on [0, π], isotropic Gaussian noise.
    // Midpoint quadrature over the arc parameter.
    const double s2 = spec.moon_noise * spec.moon_noise;
    const double norm = 1.0 / (2.0 * std::numbers::pi * s2);
    for (std::size_t i = 0; i < points.rows(); ++i) {
      double acc = 0.0;
      for (int moon = 0; moon < 2; ++moon) {
        for (std::size_t q = 0; q < kMoonQuadrature; ++q) {
          const double t = std::numbers::pi * (static_cast<double>(q) + 0.5) / static_cast<double>(kMoonQuadrature);
          double cx = 0.0, cy = 0.0;
          moon_point(moon, t, cx, cy);
          const double dx = points(i, 0) - cx, dy = points(i, 1) - cy;
          acc += std::exp(-0.5 * (dx * dx + dy * dy) / s2);
        }
      }
      out[i] = 0.5 * norm * acc / static_cast<double>(kMoonQuadrature);
    }
    return out;
  }
  const auto comps = prepare(spec);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double acc = 0.0;
    for (const auto& c : comps) acc += c.weight * gaussian_density(c, points.row(i));
    out[i] = acc;
  }
  return out;
}

}  // namespace densctl
