#include "hopnav/gp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hopnav/error.hpp"
#include "hopnav/rng.hpp"

namespace hopnav {

double squared_exponential(const Vec2& a, const Vec2& b, double lengthscale, double signal_variance) {
  return signal_variance * std::exp(-0.5 * (a - b).squaredNorm() / (lengthscale * lengthscale));
}

std::vector<double> ResidualDataset::axis(int a) const {
  std::vector<double> out;
  out.reserve(residuals.size());
  for (const Vec2& r : residuals) out.push_back(r(a));
  return out;
}

ResidualDataset residuals_from_log(std::span<const HopObservation> log) {
  ResidualDataset data;
  data.inputs.reserve(log.size());
  data.residuals.reserve(log.size());
  for (const HopObservation& h : log) {
    data.inputs.push_back(h.start);
    data.residuals.push_back(h.realized_displacement - h.predicted_displacement);
  }
  return data;
}

std::vector<Vec2> kmeans_centers(std::span<const Vec2> input, std::size_t k, std::uint64_t seed, int iterations) {
  // Work on a sorted copy so the result does not depend on input order.
  std::vector<Vec2> points(input.begin(), input.end());
  const auto less = [](const Vec2& a, const Vec2& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); };
  std::sort(points.begin(), points.end(), less);
  std::vector<Vec2> distinct = points;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (k >= distinct.size()) return distinct;

  Rng rng(seed);
  std::vector<Vec2> centers;
  centers.push_back(points[rng.index(points.size())]);
  std::vector<double> d2(points.size());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec2& c : centers) best = std::min(best, (points[i] - c).squaredNorm());
      d2[i] = best;
      total += best;
    }
    double pick = rng.uniform() * total;
    std::size_t chosen = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      pick -= d2[i];
      if (pick < 0.0 && d2[i] > 0.0) {
        chosen = i;
        break;
      }
      if (d2[i] > 0.0) chosen = i;
    }
    centers.push_back(points[chosen]);
  }

  std::vector<std::size_t> assign(points.size(), 0);
  for (int it = 0; it < iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < centers.size(); ++c) {
        const double d = (points[i] - centers[c]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (it == 0 || assign[i] != best) changed = true;
      assign[i] = best;
    }
    if (!changed) break;
    std::vector<Vec2> sums(centers.size(), Vec2::Zero());
    std::vector<std::size_t> counts(centers.size(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      sums[assign[i]] += points[i];
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (counts[c] > 0) centers[c] = sums[c] / static_cast<double>(counts[c]);
    }
  }
  return centers;
}

SparseGp SparseGp::prior(const KernelSettings& kernel) {
  SparseGp gp;
  gp.kernel_ = kernel;
  return gp;
}

SparseGp SparseGp::fit_with_inducing(std::span<const Vec2> inputs, std::span<const double> outputs,
                                     std::vector<Vec2> inducing, const KernelSettings& kernel) {
  if (inputs.size() != outputs.size()) throw Error(ErrorCode::InvalidArgument, "input/output size mismatch");
  if (inputs.empty()) throw Error(ErrorCode::InvalidArgument, "GP fit needs at least one observation");
  if (inducing.empty()) throw Error(ErrorCode::InvalidArgument, "GP fit needs at least one inducing point");
  if (!(kernel.lengthscale > 0.0 && kernel.signal_sigma > 0.0 && kernel.noise_sigma > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "kernel settings must be positive");
  }

  SparseGp gp;
  gp.kernel_ = kernel;
  gp.inducing_ = std::move(inducing);
  const auto m = static_cast<Eigen::Index>(gp.inducing_.size());
  const auto n = static_cast<Eigen::Index>(inputs.size());
  const double sf2 = kernel.signal_sigma * kernel.signal_sigma;
  const double sn2 = kernel.noise_sigma * kernel.noise_sigma;

  Eigen::MatrixXd kmm(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      kmm(i, j) = squared_exponential(gp.inducing_[i], gp.inducing_[j], kernel.lengthscale, sf2);
  Eigen::MatrixXd kmn(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) kmn(i, j) = squared_exponential(gp.inducing_[i], inputs[j], kernel.lengthscale, sf2);
  const Eigen::Map<const Eigen::VectorXd> y(outputs.data(), n);

  Eigen::LLT<Eigen::MatrixXd> llt;
  // Relative jitter, escalated until Kmm factors.
  for (double rel = 1e-12;; rel *= 10.0) {
    const double jitter = rel * sf2;
    llt.compute(kmm + jitter * Eigen::MatrixXd::Identity(m, m));
    if (llt.info() == Eigen::Success) {
      gp.jitter_ = jitter;
      break;
    }
    if (rel >= 1e-4 * (1.0 - 1e-12)) {
      throw Error(ErrorCode::SingularKernel, "inducing kernel matrix is singular even with 1e-4 jitter");
    }
  }
  gp.chol_kmm_ = llt.matrixL();
  const Eigen::MatrixXd v = llt.matrixL().solve(kmn);  // m x n
  Eigen::MatrixXd a = v * v.transpose();
  a.diagonal().array() += sn2;
  Eigen::LLT<Eigen::MatrixXd> llt_a(a);
  if (llt_a.info() != Eigen::Success) throw Error(ErrorCode::SingularKernel, "projected posterior is not positive definite");
  gp.chol_a_ = llt_a.matrixL();

  const Eigen::VectorXd vy = v * y;
  const Eigen::VectorXd a_inv_vy = llt_a.solve(vy);
  gp.weights_ = a_inv_vy;

  // log N(y | 0, V^T V + sn2 I) via the matrix determinant lemma.
  const Eigen::VectorXd half = gp.chol_a_.triangularView<Eigen::Lower>().solve(vy);
  const double quad = (y.squaredNorm() - half.squaredNorm()) / sn2;
  const double logdet = 2.0 * gp.chol_a_.diagonal().array().log().sum() + static_cast<double>(n - m) * std::log(sn2);
  gp.log_marginal_ = -0.5 * (quad + logdet + static_cast<double>(n) * std::log(2.0 * std::numbers::pi));
  return gp;
}

SparseGp SparseGp::fit(std::span<const Vec2> inputs, std::span<const double> outputs, std::size_t inducing_count,
                       const KernelSettings& kernel, std::uint64_t seed) {
  if (inputs.empty()) throw Error(ErrorCode::InvalidArgument, "GP fit needs at least one observation");
  if (inducing_count == 0) throw Error(ErrorCode::InvalidArgument, "inducing point count must be at least 1");
  std::vector<Vec2> inducing = kmeans_centers(inputs, std::min(inducing_count, inputs.size()), seed);
  if (!kernel.optimize_lengthscale) return fit_with_inducing(inputs, outputs, std::move(inducing), kernel);

  SparseGp best;
  double best_lml = -std::numeric_limits<double>::infinity();
  for (int ell = 1; ell <= 6; ++ell) {
    KernelSettings k = kernel;
    k.lengthscale = ell;
    SparseGp gp = fit_with_inducing(inputs, outputs, inducing, k);
    if (gp.log_marginal_likelihood() > best_lml) {
      best_lml = gp.log_marginal_likelihood();
      best = std::move(gp);
    }
  }
  return best;
}

GpPrediction SparseGp::predict(const Vec2& point) const {
  const double sf2 = kernel_.signal_sigma * kernel_.signal_sigma;
  if (is_prior()) return {0.0, sf2};
  const auto m = static_cast<Eigen::Index>(inducing_.size());
  Eigen::VectorXd k(m);
  for (Eigen::Index i = 0; i < m; ++i) k(i) = squared_exponential(point, inducing_[i], kernel_.lengthscale, sf2);
  const Eigen::VectorXd w = chol_kmm_.triangularView<Eigen::Lower>().solve(k);
  const Eigen::VectorXd u = chol_a_.triangularView<Eigen::Lower>().solve(w);
  const double sn2 = kernel_.noise_sigma * kernel_.noise_sigma;
  GpPrediction p;
  p.mean = w.dot(weights_);
  p.variance = std::clamp(sf2 - w.squaredNorm() + sn2 * u.squaredNorm(), 0.0, sf2);
  return p;
}

GpPair fit_residual_gps(const ResidualDataset& data, std::size_t inducing_count, const KernelSettings& kernel,
                        std::uint64_t seed) {
  if (data.size() == 0) return prior_gps(kernel);
  const std::vector<double> rx = data.axis(0);
  const std::vector<double> ry = data.axis(1);
  return {SparseGp::fit(data.inputs, rx, inducing_count, kernel, seed),
          SparseGp::fit(data.inputs, ry, inducing_count, kernel, seed)};
}

GpPair prior_gps(const KernelSettings& kernel) { return {SparseGp::prior(kernel), SparseGp::prior(kernel)}; }

GridField::GridField(Vec2 origin, Vec2 spacing, int nx, int ny, double lengthscale, double sigma, std::uint64_t seed)
    : origin_(origin), spacing_(spacing), nx_(nx), ny_(ny) {
  if (nx < 1 || ny < 1) throw Error(ErrorCode::InvalidArgument, "grid field needs at least one node");
  const int n = nx * ny;
  Eigen::MatrixXd k(n, n);
  const auto node = [&](int i) { return Vec2(origin.x() + spacing.x() * (i % nx), origin.y() + spacing.y() * (i / nx)); };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) k(i, j) = squared_exponential(node(i), node(j), lengthscale, sigma * sigma);
  k.diagonal().array() += 1e-8 * sigma * sigma;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularKernel, "grid field covariance is singular");
  Rng rng(seed);
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z(i) = rng.normal();
  values_ = llt.matrixL() * z;
}

double GridField::operator()(const Vec2& p) const {
  const double fx = std::clamp((p.x() - origin_.x()) / spacing_.x(), 0.0, static_cast<double>(nx_ - 1));
  const double fy = std::clamp((p.y() - origin_.y()) / spacing_.y(), 0.0, static_cast<double>(ny_ - 1));
  const int ix = std::min(static_cast<int>(fx), std::max(nx_ - 2, 0));
  const int iy = std::min(static_cast<int>(fy), std::max(ny_ - 2, 0));
  const double tx = nx_ > 1 ? fx - ix : 0.0;
  const double ty = ny_ > 1 ? fy - iy : 0.0;
  const int ix1 = std::min(ix + 1, nx_ - 1);
  const int iy1 = std::min(iy + 1, ny_ - 1);
  return (1 - tx) * (1 - ty) * at_node(ix, iy) + tx * (1 - ty) * at_node(ix1, iy) + (1 - tx) * ty * at_node(ix, iy1) +
         tx * ty * at_node(ix1, iy1);
}

}  // namespace hopnav
