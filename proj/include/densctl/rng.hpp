#pragma once

#include <array>
#include <cstdint>

namespace densctl {

/// Pinned generator "densctl-rng v1": xoshiro256** seeded through SplitMix64,
/// uniforms from the top 53 bits, normals by Box–Muller over that uniform
/// stream (both outputs used). Changing any of this breaks reproducibility of
/// every stored experiment, so it is versioned rather than configurable.
class Rng {
 public:
  static constexpr int kVersion = 1;

  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on (0, 1], safe for log().
  double uniform_open0();
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Independent stream derived from this one's seed, for partitioned work.
  Rng split(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace densctl
