#include "densctl/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "densctl/kernels.hpp"
#include "densctl/optimizer.hpp"

namespace densctl {

Dedup dedup_rows(const Matrix& m) {
  Dedup out;
  const std::size_t n = m.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto row_less = [&](std::size_t a, std::size_t b) {
    auto ra = m.row(a), rb = m.row(b);
    for (std::size_t j = 0; j < ra.size(); ++j) {
      if (ra[j] != rb[j]) return ra[j] < rb[j];
    }
    return a < b;
  };
  auto row_equal = [&](std::size_t a, std::size_t b) {
    auto ra = m.row(a), rb = m.row(b);
    return std::equal(ra.begin(), ra.end(), rb.begin());
  };
  std::sort(order.begin(), order.end(), row_less);

  // First occurrence (lowest index) in each equal run is the representative.
  std::vector<std::size_t> first_of(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && row_equal(order[i], order[j + 1])) ++j;
    for (std::size_t t = i; t <= j; ++t) first_of[order[t]] = order[i];
    i = j + 1;
  }
  std::vector<std::size_t> slot(n, n);
  out.representative_of.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (first_of[r] == r) {
      slot[r] = out.unique.size();
      out.unique.push_back(r);
    }
    out.representative_of[r] = slot[first_of[r]];
  }
  return out;
}

std::vector<double> knn_avg_distance(const FeatureSet& fs, const DensityConfig& cfg) {
  require(cfg.k >= 1, ErrorKind::InvalidArgument, "density: k must be >= 1");
  require(fs.size() > cfg.k, ErrorKind::InvalidArgument,
          "density: need N > k (N=" + std::to_string(fs.size()) + ", k=" + std::to_string(cfg.k) + ")");
  require(fs.features.all_finite(), ErrorKind::NonFinite, "density: non-finite feature values");
  const auto knn = kernels::omp::knn(fs.features, fs.features, cfg.k, true);
  std::vector<double> avg(fs.size());
  for (std::size_t i = 0; i < fs.size(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < cfg.k; ++j) sum += knn.distance(i, j);
    avg[i] = sum / static_cast<double>(cfg.k);
  }
  return avg;
}

DensityEstimate estimate_density(const FeatureSet& fs, const DensityConfig& cfg) {
  require(cfg.n >= 1 && cfg.n <= kMaxManifoldDim, ErrorKind::InvalidArgument,
          "density: n must be in [1, " + std::to_string(kMaxManifoldDim) + "]");
  require(fs.size() > cfg.k, ErrorKind::InvalidArgument,
          "density: need N > k (N=" + std::to_string(fs.size()) + ", k=" + std::to_string(cfg.k) + ")");

  const Dedup dd = dedup_rows(fs.features);
  FeatureSet unique{fs.features.gather_rows(dd.unique), fs.source_tag};
  require(unique.size() > cfg.k, ErrorKind::InvalidArgument,
          "density: only " + std::to_string(unique.size()) + " distinct rows for k=" +
              std::to_string(cfg.k));
  const std::vector<double> unique_dist = knn_avg_distance(unique, cfg);

  DensityEstimate est;
  est.config = cfg;
  est.duplicates = fs.size() - unique.size();
  est.avg_knn_distances.resize(fs.size());
  for (std::size_t i = 0; i < fs.size(); ++i) {
    est.avg_knn_distances[i] = unique_dist[dd.representative_of[i]];
    require(est.avg_knn_distances[i] > 0.0, ErrorKind::InvalidArgument,
            "density: zero neighbor distance at row " + std::to_string(i));
  }

  // ρ̂_i ∝ d_i^{-n}; normalize in log space so large n or tiny d cannot overflow.
  const double n = static_cast<double>(cfg.n);
  std::vector<double> log_rho(fs.size());
  for (std::size_t i = 0; i < fs.size(); ++i) log_rho[i] = -n * std::log(est.avg_knn_distances[i]);
  const double peak = *std::max_element(log_rho.begin(), log_rho.end());
  double total = 0.0;
  for (double v : log_rho) total += std::exp(v - peak);
  const double count = static_cast<double>(fs.size());
  est.densities.resize(fs.size());
  for (std::size_t i = 0; i < fs.size(); ++i) {
    est.densities[i] = count * std::exp(log_rho[i] - peak) / total;
  }
  return est;
}

namespace {

struct Standardizer {
  std::vector<double> mean, scale;
};

Standardizer fit_standardizer(const Matrix& x, std::span<const std::size_t> rows) {
  const std::size_t d = x.cols();
  Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  if (rows.empty()) return s;
  for (std::size_t r : rows) {
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += x(r, j);
  }
  for (double& m : s.mean) m /= static_cast<double>(rows.size());
  std::vector<double> var(d, 0.0);
  for (std::size_t r : rows) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = x(r, j) - s.mean[j];
      var[j] += c * c;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(rows.size()));
    s.scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Matrix standardize(const Matrix& x, const Standardizer& s) {
  Matrix out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] = static_cast<float>((row[j] - s.mean[j]) / s.scale[j]);
    }
  }
  return out;
}

// First layer on standardized input: ((x-μ)/σ)·W + b = x·(W/σ) + (b - (μ/σ)·W).
void fold_standardizer(Mlp& net, const Standardizer& s) {
  auto& layer = net.layers().front();
  const std::size_t in = layer.weight.rows(), out = layer.weight.cols();
  std::vector<double> bias(layer.bias.begin(), layer.bias.end());
  for (std::size_t i = 0; i < in; ++i) {
    for (std::size_t j = 0; j < out; ++j) {
      const double w = layer.weight(i, j);
      bias[j] -= s.mean[i] / s.scale[i] * w;
      layer.weight(i, j) = static_cast<float>(w / s.scale[i]);
    }
  }
  for (std::size_t j = 0; j < out; ++j) layer.bias[j] = static_cast<float>(bias[j]);
}

double mse_of(const Mlp& net, const Matrix& x, std::span<const double> y) {
  if (x.rows() == 0) return 0.0;
  const Matrix pred = net.predict(x);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double e = pred(i, 0) - y[i];
    acc += e * e;
  }
  return acc / static_cast<double>(x.rows());
}

}  // namespace

DensityRegressor train_regressor(const FeatureSet& fs, const DensityEstimate& est,
                                 const RegressorConfig& cfg) {
  const std::size_t n = fs.size();
  require(est.size() == n, ErrorKind::DimensionMismatch,
          "train_regressor: density estimate has " + std::to_string(est.size()) +
              " entries for " + std::to_string(n) + " samples");
  require(n >= 2, ErrorKind::InvalidArgument, "train_regressor: need at least 2 samples");
  require(cfg.batch_size >= 1, ErrorKind::InvalidArgument, "train_regressor: batch size must be >= 1");
  require(cfg.holdout_fraction >= 0.0 && cfg.holdout_fraction < 1.0, ErrorKind::InvalidArgument,
          "train_regressor: holdout fraction must be in [0, 1)");

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto holdout = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(n)));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(holdout), order.end());
  std::vector<std::size_t> test_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(holdout));

  const Standardizer stdz = fit_standardizer(fs.features, train_rows);
  const Matrix x_std = standardize(fs.features, stdz);

  std::vector<std::size_t> sizes{fs.dim()};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(1);
  DensityRegressor reg{Mlp::random(sizes, cfg.activation, Activation::Identity, rng), {}};
  OptimizerState opt(reg.net, {OptimizerKind::Adam, cfg.learning_rate});

  ForwardCache cache;
  std::vector<std::size_t> batch_rows;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Cosine decay to a tenth of the base rate.
    const double progress = cfg.epochs > 1 ? static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1) : 1.0;
    opt.set_learning_rate(cfg.learning_rate * (0.1 + 0.45 * (1.0 + std::cos(std::numbers::pi * progress))));
    for (std::size_t i = train_rows.size(); i > 1; --i) std::swap(train_rows[i - 1], train_rows[rng.below(i)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < train_rows.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, train_rows.size() - start);
      batch_rows.assign(train_rows.begin() + static_cast<std::ptrdiff_t>(start),
                        train_rows.begin() + static_cast<std::ptrdiff_t>(start + count));
      const Matrix xb = x_std.gather_rows(batch_rows);
      const Matrix pred = reg.net.forward(xb, cache);
      Matrix grad(count, 1);
      for (std::size_t i = 0; i < count; ++i) {
        const double e = pred(i, 0) - est.densities[batch_rows[i]];
        epoch_loss += e * e;
        grad(i, 0) = static_cast<float>(2.0 * e / static_cast<double>(count));
      }
      opt.step(reg.net, reg.net.backward(cache, grad));
    }
    require(std::isfinite(epoch_loss), ErrorKind::Divergence,
            "train_regressor: loss diverged at epoch " + std::to_string(epoch));
  }

  fold_standardizer(reg.net, stdz);

  auto targets_of = [&](const std::vector<std::size_t>& rows) {
    std::vector<double> y;
    y.reserve(rows.size());
    for (std::size_t r : rows) y.push_back(est.densities[r]);
    return y;
  };
  const auto y_train = targets_of(train_rows);
  const auto y_test = targets_of(test_rows);
  reg.stats.train_mse = mse_of(reg.net, fs.features.gather_rows(train_rows), y_train);
  const auto& eval_rows = test_rows.empty() ? train_rows : test_rows;
  const auto& y_eval = test_rows.empty() ? y_train : y_test;
  reg.stats.heldout_mse = mse_of(reg.net, fs.features.gather_rows(eval_rows), y_eval);
  const double mean = std::accumulate(y_eval.begin(), y_eval.end(), 0.0) / static_cast<double>(y_eval.size());
  double var = 0.0;
  for (double v : y_eval) var += (v - mean) * (v - mean);
  var /= static_cast<double>(y_eval.size());
  reg.stats.heldout_r2 = var > 0.0 ? 1.0 - reg.stats.heldout_mse / var : (reg.stats.heldout_mse < 1e-12 ? 1.0 : 0.0);
  reg.stats.epochs = cfg.epochs;
  reg.stats.seed = cfg.seed;
  reg.stats.box_min.assign(fs.dim(), 0.0f);
  reg.stats.box_max.assign(fs.dim(), 0.0f);
  for (std::size_t j = 0; j < fs.dim(); ++j) {
    float lo = fs.features(0, j), hi = lo;
    for (std::size_t i = 1; i < n; ++i) {
      lo = std::min(lo, fs.features(i, j));
      hi = std::max(hi, fs.features(i, j));
    }
    reg.stats.box_min[j] = lo;
    reg.stats.box_max[j] = hi;
  }
  return reg;
}

std::vector<double> pseudo_density(const DensityRegressor& reg, const Matrix& features) {
  require(features.cols() == reg.input_dim(), ErrorKind::DimensionMismatch,
          "pseudo_density: feature dim " + std::to_string(features.cols()) + " != regressor input " +
              std::to_string(reg.input_dim()));
  const Matrix out = reg.net.predict(features);
  return {out.values().begin(), out.values().end()};
}

Matrix pseudo_density_gradient(const DensityRegressor& reg, const Matrix& features) {
  require(features.cols() == reg.input_dim(), ErrorKind::DimensionMismatch,
          "pseudo_density_gradient: feature dim mismatch");
  ForwardCache cache;
  reg.net.forward(features, cache);
  return reg.net.backward(cache, Matrix(features.rows(), 1, 1.0f)).input;
}

std::size_t count_extrapolated(const DensityRegressor& reg, const Matrix& features) {
  const auto& lo = reg.stats.box_min;
  const auto& hi = reg.stats.box_max;
  if (lo.size() != features.cols()) return 0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < features.rows(); ++r) {
    auto row = features.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] < lo[j] || row[j] > hi[j]) {
        ++count;
        break;
      }
    }
  }
  return count;
}

ThresholdCalibration calibrate_threshold(std::span<const double> densities, double percentile) {
  require(!densities.empty(), ErrorKind::InvalidArgument, "calibrate_threshold: empty densities");
  require(percentile > 0.0 && percentile < 100.0, ErrorKind::InvalidArgument,
          "calibrate_threshold: percentile must be in (0, 100)");
  std::vector<double> sorted(densities.begin(), densities.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // Guard the ceil against representation error, e.g. 0.2*5 = 1.0000000000000002.
  auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return {percentile, sorted[rank - 1]};
}

}  // namespace densctl
