#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "densctl/features.hpp"

namespace densctl {

enum class SyntheticKind { GaussianMixture, Ring, TwoMoons };

const char* to_string(SyntheticKind k);
SyntheticKind synthetic_kind_from_string(const std::string& s);

struct MixtureComponent {
  std::vector<double> mean;
  /// D × D row-major, must be positive definite.
  std::vector<double> covariance;
  double weight = 1.0;
};

/// Parameters of a toy distribution with a closed-form (or quadrature)
/// density. Ring is a Gaussian mixture with means evenly spaced on a circle.
struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::GaussianMixture;
  std::vector<MixtureComponent> components;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  /// Isotropic noise for two-moons.
  double moon_noise = 0.1;

  std::size_t dim() const;

  static SyntheticSpec ring(std::size_t modes, double radius, double sigma, std::size_t count,
                            std::uint64_t seed);
  /// The repo's toy benchmark: a tight 2-D core (weight 0.4) and three wider
  /// lobes that overlap it, so density falls off smoothly from the core to
  /// the tails without empty gaps between modes.
  static SyntheticSpec benchmark_mixture(std::size_t count, std::uint64_t seed);
  static SyntheticSpec two_moons(double noise, std::size_t count, std::uint64_t seed);
  static SyntheticSpec isotropic(std::vector<std::vector<double>> means, std::vector<double> sigmas,
                                 std::vector<double> weights, std::size_t count, std::uint64_t seed);
};

struct SyntheticData {
  FeatureSet features;
  /// Analytic density of each sample under the generating distribution.
  std::vector<double> true_density;
  /// Mixture component (or moon) each sample was drawn from.
  std::vector<std::uint32_t> component;
};

void validate(const SyntheticSpec& spec);
SyntheticData generate_synthetic(const SyntheticSpec& spec);
/// Density of the spec's distribution at arbitrary points.
std::vector<double> analytic_density(const SyntheticSpec& spec, const Matrix& points);

}  // namespace densctl
