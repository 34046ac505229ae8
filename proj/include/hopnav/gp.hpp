#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "hopnav/dynamics.hpp"

namespace hopnav {

struct KernelSettings {
  double lengthscale = 3.0;   // m
  double signal_sigma = 0.3;  // m
  double noise_sigma = 0.1;   // m
  /// Pick the lengthscale from {1, ..., 6} m by marginal likelihood.
  bool optimize_lengthscale = false;
};

double squared_exponential(const Vec2& a, const Vec2& b, double lengthscale, double signal_variance);

/// Per-hop residuals r = realized - predicted displacement, keyed by the hop
/// start position.
struct ResidualDataset {
  std::vector<Vec2> inputs;
  std::vector<Vec2> residuals;

  std::size_t size() const { return inputs.size(); }
  std::vector<double> axis(int a) const;
};

struct HopObservation {
  Vec2 start = Vec2::Zero();
  Vec2 predicted_displacement = Vec2::Zero();
  Vec2 realized_displacement = Vec2::Zero();
};

ResidualDataset residuals_from_log(std::span<const HopObservation> log);

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// Deterministic-training-conditional sparse GP with a squared-exponential
/// kernel. With the inducing set equal to the training inputs it reproduces
/// the exact GP posterior.
class SparseGp {
 public:
  SparseGp() = default;

  /// Prior-only model (no data).
  static SparseGp prior(const KernelSettings& kernel);

  /// Inducing points from seeded k-means over the inputs.
  static SparseGp fit(std::span<const Vec2> inputs, std::span<const double> outputs, std::size_t inducing_count,
                      const KernelSettings& kernel, std::uint64_t seed);

  static SparseGp fit_with_inducing(std::span<const Vec2> inputs, std::span<const double> outputs,
                                    std::vector<Vec2> inducing, const KernelSettings& kernel);

  GpPrediction predict(const Vec2& point) const;

  const KernelSettings& kernel() const { return kernel_; }
  const std::vector<Vec2>& inducing_points() const { return inducing_; }
  double jitter() const { return jitter_; }
  bool is_prior() const { return inducing_.empty(); }

  /// DTC log marginal likelihood of the data the model was fitted on.
  double log_marginal_likelihood() const { return log_marginal_; }

 private:
  KernelSettings kernel_;
  std::vector<Vec2> inducing_;
  Eigen::MatrixXd chol_kmm_;  // lower Cholesky of Kmm + jitter
  Eigen::MatrixXd chol_a_;    // lower Cholesky of sigma_n^2 I + V V^T
  Eigen::VectorXd weights_;   // mean = (L^-1 k(Z, x)) . weights_
  double jitter_ = 0.0;
  double log_marginal_ = 0.0;
};

/// Seeded k-means++ / Lloyd clustering; returns min(k, distinct points) centers.
std::vector<Vec2> kmeans_centers(std::span<const Vec2> points, std::size_t k, std::uint64_t seed, int iterations = 50);

struct GpPair {
  SparseGp x;
  SparseGp y;
};

GpPair fit_residual_gps(const ResidualDataset& data, std::size_t inducing_count, const KernelSettings& kernel,
                        std::uint64_t seed);

GpPair prior_gps(const KernelSettings& kernel);

/// Scalar field sampled from a zero-mean GP prior on a regular grid and
/// bilinearly interpolated (clamped at the grid edge).
class GridField {
 public:
  GridField(Vec2 origin, Vec2 spacing, int nx, int ny, double lengthscale, double sigma, std::uint64_t seed);

  double operator()(const Vec2& p) const;
  double at_node(int ix, int iy) const { return values_(ix + nx_ * iy); }

 private:
  Vec2 origin_, spacing_;
  int nx_, ny_;
  Eigen::VectorXd values_;
};

}  // namespace hopnav
