#pragma once

#include <cstddef>

namespace densctl::detail {

/// out[j] = Σ_i x[i·xs] · m[i·ms + j] for j < n, summed in double over i in
/// increasing order, skipping zero x. Columns are processed in blocks small
/// enough for the accumulators to stay in registers; the per-element order of
/// additions does not depend on the blocking.
inline void accumulate_rows(const float* x, std::size_t xs, std::size_t count, const float* m, std::size_t ms,
                            std::size_t n, double* out) {
  constexpr std::size_t kBlock = 16;
  std::size_t j0 = 0;
  for (; j0 + kBlock <= n; j0 += kBlock) {
    double acc[kBlock] = {};
    for (std::size_t i = 0; i < count; ++i) {
      const double xi = x[i * xs];
      if (xi == 0.0) continue;
      const float* mi = m + i * ms + j0;
      for (std::size_t t = 0; t < kBlock; ++t) acc[t] += xi * mi[t];
    }
    for (std::size_t t = 0; t < kBlock; ++t) out[j0 + t] = acc[t];
  }
  if (j0 == n) return;
  const std::size_t rest = n - j0;
  double acc[kBlock] = {};
  for (std::size_t i = 0; i < count; ++i) {
    const double xi = x[i * xs];
    if (xi == 0.0) continue;
    const float* mi = m + i * ms + j0;
    for (std::size_t t = 0; t < rest; ++t) acc[t] += xi * mi[t];
  }
  for (std::size_t t = 0; t < rest; ++t) out[j0 + t] = acc[t];
}

}  // namespace densctl::detail
