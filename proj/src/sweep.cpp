#include "densctl/sweep.hpp"

#include <algorithm>
#include <numeric>

#include "densctl/error.hpp"
#include "densctl/metrics.hpp"
#include "densctl/sampler.hpp"

namespace densctl {

bool dominates(const SweepPoint& a, const SweepPoint& b) {
  return a.precision >= b.precision && a.recall >= b.recall && (a.precision > b.precision || a.recall > b.recall);
}

std::vector<std::size_t> pareto_front(std::span<const SweepPoint> points) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const bool beaten = std::any_of(points.begin(), points.end(), [&](const SweepPoint& p) { return dominates(p, points[i]); });
    if (!beaten) out.push_back(i);
  }
  return out;
}

namespace {

SweepPoint score(const Mlp& gen, const DensityRegressor& reg, const FeatureSet& real_eval, double pct, double tau,
                 double w, const SweepConfig& cfg, Matrix& samples) {
  Rng rng(cfg.seed);
  SamplingConfig sc;
  sc.tau = tau;
  sc.weight = w;
  const SampleBatch batch = importance_sample(gen, reg, sc, cfg.count, rng);
  samples = batch.accepted_outputs();
  const EvalReport rep = evaluate(real_eval, FeatureSet{samples, "sweep"}, cfg.knn);
  return {pct, tau, w, rep.precision, rep.recall, rep.frechet_distance, batch.acceptance_rate(), batch.attempts};
}

}  // namespace

SweepResult sweep_sampling(const Mlp& gen, const DensityRegressor& reg, std::span<const double> real_densities,
                           const FeatureSet& real_eval, const SweepConfig& cfg) {
  require(!real_densities.empty(), ErrorKind::InvalidArgument, "sweep: no real densities for the threshold");
  require(cfg.count >= 1, ErrorKind::InvalidArgument, "sweep: count must be >= 1");
  for (double w : cfg.weights) validate_weight(w);

  SweepResult out;
  out.baseline = score(gen, reg, real_eval, 0.0, 0.0, 1.0, cfg, out.baseline_samples);
  for (double pct : cfg.tau_percentiles) {
    const double tau = calibrate_threshold(real_densities, pct).threshold;
    std::vector<SweepPoint> row;
    for (double w : cfg.weights) {
      out.samples.emplace_back();
      row.push_back(score(gen, reg, real_eval, pct, tau, w, cfg, out.samples.back()));
    }

    std::vector<SweepPoint> by_w = row;
    SweepPoint base = out.baseline;
    base.tau_percentile = pct;
    base.tau = tau;
    by_w.push_back(base);
    std::stable_sort(by_w.begin(), by_w.end(), [](const SweepPoint& a, const SweepPoint& b) { return a.weight < b.weight; });
    for (std::size_t i = 1; i < by_w.size(); ++i) {
      if (by_w[i].precision < by_w[i - 1].precision) out.precision_monotone = false;
    }
    out.points.insert(out.points.end(), row.begin(), row.end());
  }
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    if (dominates(out.baseline, out.points[i])) out.dominated_by_baseline.push_back(i);
  }
  return out;
}

}  // namespace densctl
