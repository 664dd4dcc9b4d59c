#include "densctl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "densctl/density.hpp"
#include "densctl/kernels.hpp"

namespace densctl {

namespace {

constexpr double kJitter = 1e-6;

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

Moments moments_of(const Matrix& m) {
  const auto n = static_cast<Eigen::Index>(m.rows());
  const auto d = static_cast<Eigen::Index>(m.cols());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = m(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  Moments out;
  out.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - out.mean.transpose();
  out.cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  return out;
}

bool degenerate(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
  const double top = std::max(es.eigenvalues().maxCoeff(), 1.0);
  return es.eigenvalues().minCoeff() <= 1e-12 * top;
}

// Symmetric PSD square root with negative eigenvalues clamped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double trace_sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

}  // namespace

std::vector<std::uint8_t> ManifoldIndex::covers(const Matrix& queries) const {
  require(queries.cols() == points.cols(), ErrorKind::DimensionMismatch,
          "manifold: query dim " + std::to_string(queries.cols()) + " != reference dim " +
              std::to_string(points.cols()));
  return kernels::omp::covered(queries, points, radii);
}

double ManifoldIndex::coverage(const Matrix& queries) const {
  if (queries.rows() == 0) return 0.0;
  const auto flags = covers(queries);
  const auto inside = std::count(flags.begin(), flags.end(), std::uint8_t{1});
  return static_cast<double>(inside) / static_cast<double>(queries.rows());
}

ManifoldIndex build_manifold(const FeatureSet& fs, std::size_t k) {
  require(k >= 1, ErrorKind::InvalidArgument, "manifold: k must be >= 1");
  require(fs.features.all_finite(), ErrorKind::NonFinite, "manifold: non-finite feature values");
  const Dedup dd = dedup_rows(fs.features);
  require(dd.unique.size() > k, ErrorKind::InvalidArgument,
          "manifold: need more than k distinct points (distinct=" + std::to_string(dd.unique.size()) +
              ", k=" + std::to_string(k) + ")");
  ManifoldIndex idx;
  idx.k = k;
  idx.points = fs.features.gather_rows(dd.unique);
  const auto knn = kernels::omp::knn(idx.points, idx.points, k, true);
  idx.radii.resize(idx.points.rows());
  for (std::size_t i = 0; i < idx.points.rows(); ++i) idx.radii[i] = knn.distance(i, k - 1);
  return idx;
}

PrecisionRecall precision_recall(const FeatureSet& real, const FeatureSet& gen, std::size_t k) {
  require(real.dim() == gen.dim(), ErrorKind::DimensionMismatch,
          "precision/recall: real dim " + std::to_string(real.dim()) + " != generated dim " +
              std::to_string(gen.dim()));
  const ManifoldIndex real_m = build_manifold(real, k);
  const ManifoldIndex gen_m = build_manifold(gen, k);
  return {real_m.coverage(gen.features), gen_m.coverage(real.features)};
}

FrechetResult frechet(const FeatureSet& a, const FeatureSet& b) {
  require(a.dim() == b.dim(), ErrorKind::DimensionMismatch,
          "frechet: dims differ (" + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()) + ")");
  require(a.size() >= 2 && b.size() >= 2, ErrorKind::InvalidArgument, "frechet: need at least 2 points per set");
  require(a.features.all_finite() && b.features.all_finite(), ErrorKind::NonFinite,
          "frechet: non-finite feature values");
  Moments ma = moments_of(a.features);
  Moments mb = moments_of(b.features);
  FrechetResult out;
  if (degenerate(ma.cov) || degenerate(mb.cov)) {
    out.jitter = kJitter;
    ma.cov.diagonal().array() += kJitter;
    mb.cov.diagonal().array() += kJitter;
  }
  const Eigen::MatrixXd ra = psd_sqrt(ma.cov);
  const double cross = trace_sqrt_psd(ra * mb.cov * ra);
  const double d = (ma.mean - mb.mean).squaredNorm() + ma.cov.trace() + mb.cov.trace() - 2.0 * cross;
  out.distance = std::max(d, 0.0);
  return out;
}

EvalReport evaluate(const FeatureSet& real, const FeatureSet& gen, std::size_t k) {
  const PrecisionRecall pr = precision_recall(real, gen, k);
  const FrechetResult fd = frechet(real, gen);
  EvalReport r;
  r.precision = pr.precision;
  r.recall = pr.recall;
  r.frechet_distance = fd.distance;
  r.frechet_jitter = fd.jitter;
  r.real_count = real.size();
  r.gen_count = gen.size();
  r.k = k;
  return r;
}

}  // namespace densctl
