#pragma once

// Test-only reference computations, written independently of the library's
// code paths: double-precision MLP evaluation, brute-force k-NN density, and
// finite-difference helpers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "densctl/matrix.hpp"
#include "densctl/mlp.hpp"

namespace oracle {

inline double act(densctl::Activation a, double v) {
  switch (a) {
    case densctl::Activation::Identity: return v;
    case densctl::Activation::Tanh: return std::tanh(v);
    case densctl::Activation::Relu: return v > 0 ? v : 0;
    case densctl::Activation::LeakyRelu: return v > 0 ? v : densctl::kLeakySlope * v;
  }
  return v;
}

/// Forward pass for one input row, all in double.
inline std::vector<double> forward(const densctl::Mlp& net, std::vector<double> x) {
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& layer = net.layers()[l];
    std::vector<double> y(layer.weight.cols());
    for (std::size_t j = 0; j < y.size(); ++j) {
      double s = layer.bias[j];
      for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * static_cast<double>(layer.weight(i, j));
      y[j] = act(net.activation_of(l), s);
    }
    x = std::move(y);
  }
  return x;
}

/// Sign pattern of every hidden preactivation, used to detect when a finite
/// difference step crosses a relu kink (where the difference is meaningless).
inline std::vector<bool> pattern(const densctl::Mlp& net, std::vector<double> x) {
  std::vector<bool> out;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& layer = net.layers()[l];
    std::vector<double> y(layer.weight.cols());
    for (std::size_t j = 0; j < y.size(); ++j) {
      double s = layer.bias[j];
      for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * static_cast<double>(layer.weight(i, j));
      out.push_back(s > 0);
      y[j] = act(net.activation_of(l), s);
    }
    x = std::move(y);
  }
  return out;
}

inline double act_slope(densctl::Activation a, double v) {
  switch (a) {
    case densctl::Activation::Identity: return 1;
    case densctl::Activation::Tanh: return 1 - std::tanh(v) * std::tanh(v);
    case densctl::Activation::Relu: return v > 0 ? 1 : 0;
    case densctl::Activation::LeakyRelu: return v > 0 ? 1 : densctl::kLeakySlope;
  }
  return 1;
}

/// Gradient of output `o` with respect to the input, by forward-mode tangent
/// propagation (one tangent per input dimension), in double.
inline std::vector<double> input_gradient(const densctl::Mlp& net, std::vector<double> x, std::size_t o = 0) {
  const std::size_t d = x.size();
  std::vector<std::vector<double>> t(d, std::vector<double>(d, 0.0));  // t[dir][unit]
  for (std::size_t i = 0; i < d; ++i) t[i][i] = 1;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& layer = net.layers()[l];
    const std::size_t m = layer.weight.cols();
    std::vector<double> y(m);
    std::vector<std::vector<double>> ty(d, std::vector<double>(m, 0.0));
    for (std::size_t j = 0; j < m; ++j) {
      double s = layer.bias[j];
      for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * static_cast<double>(layer.weight(i, j));
      const double slope = act_slope(net.activation_of(l), s);
      y[j] = act(net.activation_of(l), s);
      for (std::size_t dir = 0; dir < d; ++dir) {
        double ts = 0;
        for (std::size_t i = 0; i < x.size(); ++i) ts += t[dir][i] * static_cast<double>(layer.weight(i, j));
        ty[dir][j] = slope * ts;
      }
    }
    x = std::move(y);
    t = std::move(ty);
  }
  std::vector<double> g(d);
  for (std::size_t dir = 0; dir < d; ++dir) g[dir] = t[dir][o];
  return g;
}

/// Relative error with an absolute floor so near-zero entries don't dominate.
inline double rel_err(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Worst relative error over central differences taken on float parameter
/// slots. A probe whose ±h step changes the kink pattern is skipped.
struct FdProbe {
  std::function<double()> loss;
  std::function<std::vector<bool>()> pattern;
  double h = 1e-3;
  double floor = 1e-2;

  std::vector<bool> base;
  double worst = 0;
  std::size_t checked = 0, skipped = 0;

  void start() { base = pattern(); }
  void probe(float* slot, double analytic) {
    const float keep = *slot;
    *slot = keep + static_cast<float>(h);
    const double up = loss();
    const bool flip_up = pattern() != base;
    *slot = keep - static_cast<float>(h);
    const double down = loss();
    const bool flip_down = pattern() != base;
    *slot = keep;
    if (flip_up || flip_down) {
      ++skipped;
      return;
    }
    ++checked;
    worst = std::max(worst, rel_err(analytic, (up - down) / (2 * h), floor));
  }
};

inline std::vector<double> row(const densctl::Matrix& m, std::size_t r) {
  return {m.row(r).begin(), m.row(r).end()};
}

/// Central difference of a scalar function of a vector, in double.
inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// Brute-force k-NN average-distance density: sort every distance list
/// in full, no dedup (callers pass distinct points).
inline std::vector<double> brute_density(const std::vector<std::vector<double>>& pts, std::size_t k,
                                         unsigned n) {
  const std::size_t N = pts.size();
  std::vector<double> rho_hat(N);
  for (std::size_t i = 0; i < N; ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < N; ++j) {
      if (j == i) continue;
      double s = 0;
      for (std::size_t t = 0; t < pts[i].size(); ++t) s += (pts[i][t] - pts[j][t]) * (pts[i][t] - pts[j][t]);
      d.push_back(std::sqrt(s));
    }
    std::sort(d.begin(), d.end());
    double avg = 0;
    for (std::size_t t = 0; t < k; ++t) avg += d[t];
    avg /= static_cast<double>(k);
    rho_hat[i] = 1.0 / std::pow(avg, static_cast<double>(n));
  }
  double total = 0;
  for (double v : rho_hat) total += v;
  for (double& v : rho_hat) v = static_cast<double>(N) * v / total;
  return rho_hat;
}

inline densctl::Matrix from_rows(const std::vector<std::vector<double>>& rows) {
  densctl::Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = static_cast<float>(rows[r][c]);
  }
  return m;
}

inline densctl::Matrix column(std::initializer_list<double> values) {
  densctl::Matrix m(values.size(), 1);
  std::size_t i = 0;
  for (double v : values) m(i++, 0) = static_cast<float>(v);
  return m;
}

}  // namespace oracle
