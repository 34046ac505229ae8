#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hopnav/dynamics.hpp"

namespace hopnav {

using Vec5 = Eigen::Matrix<double, 5, 1>;

struct TrainingSample {
  Vec3 velocity = Vec3::Zero();
  LegPlacement placement;
  Vec2 displacement = Vec2::Zero();
  Vec3 next_velocity = Vec3::Zero();
};

/// Box of leg angles the hop model was trained on; also the Bound() limits.
struct AngleLimits {
  double pitch_min = 0.7853981633974483;  // pi/4
  double pitch_max = 1.5707963267948966;  // pi/2
  double yaw_min = -1.5707963267948966;
  double yaw_max = 1.5707963267948966;
};

struct SamplingRanges {
  double speed_min = 1.0;
  double speed_max = 8.0;
  double descent_min = 0.7853981633974483;  // 45 deg below horizontal
  double descent_max = 1.3962634015954636;  // 80 deg
  AngleLimits angles;
};

std::vector<TrainingSample> generate_training_data(const SlipParams& params, std::size_t count, std::uint64_t seed,
                                                   const SamplingRanges& ranges = {},
                                                   const IntegratorSettings& settings = {});

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

struct HopPrediction {
  Vec2 displacement = Vec2::Zero();
  Vec3 next_velocity = Vec3::Zero();
};

struct TrainingInfo {
  std::uint64_t sample_count = 0;
  double final_loss = 0.0;
  double validation_rmse = 0.0;  // m, displacement only
  double control_error = 0.0;    // m, 90th percentile round-trip error (0 if not measured)
};

/// Forward hop map (v_i, pitch, yaw) -> (displacement, v_{i+1}). The network
/// runs in the heading frame of v_i; predictions are rotated back to world.
class HopModel {
 public:
  HopModel() = default;
  HopModel(std::vector<int> layer_sizes, std::uint64_t seed);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  Vec5 input_mean = Vec5::Zero();
  Vec5 input_scale = Vec5::Ones();
  Vec5 output_mean = Vec5::Zero();
  Vec5 output_scale = Vec5::Ones();
  TrainingInfo info;

  HopPrediction predict(const Vec3& velocity, const LegPlacement& placement) const;

  /// Heading-frame network evaluation on raw (unnormalized) features.
  Vec5 evaluate(const Vec5& features) const;

  /// Heading-frame evaluation plus d(output)/d(pitch, yaw).
  Vec5 evaluate_with_jacobian(const Vec5& features, Eigen::Matrix<double, 5, 2>& jacobian) const;

  void save(const std::string& path) const;
  static HopModel load(const std::string& path);
  void write(std::ostream& out) const;
  static HopModel read(std::istream& in);

  bool operator==(const HopModel& other) const;

 private:
  std::vector<int> sizes_;
  std::vector<DenseLayer> layers_;
};

/// Heading-frame features (v_forward, v_lateral = 0, v_z, pitch, yaw).
Vec5 heading_features(const Vec3& velocity, const LegPlacement& placement);

struct TrainConfig {
  std::vector<int> hidden = {64, 64};
  int epochs = 300;
  int batch_size = 128;
  double learning_rate = 3e-3;
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;
};

HopModel train(const TrainConfig& config, std::span<const TrainingSample> samples);

/// Validation RMSE of the displacement prediction over a sample set (m).
double displacement_rmse(const HopModel& model, std::span<const TrainingSample> samples);

struct CostWeights {
  double displacement = 1.0;  // c1
  double velocity = 0.25;     // c2
  double bound = 100.0;       // c3
};

struct AngleSolution {
  LegPlacement placement;
  double cost = 0.0;
  HopPrediction prediction;
};

struct SolverSettings {
  int grid = 4;                // grid x grid starts over the angle box
  int refine_iterations = 30;  // Levenberg-Marquardt steps per start
  int iterations = 200;        // normalized-gradient polish of the best start
  double initial_step = 0.01;  // rad, first polish step
  double min_step = 1e-12;
};

double bound_penalty(const LegPlacement& placement, const AngleLimits& limits = {});

double hop_cost(const HopModel& model, const Vec3& velocity, const Vec2& target_displacement,
                const Vec3& desired_velocity, const CostWeights& weights, const LegPlacement& placement,
                const AngleLimits& limits = {});

/// Multi-start search over (pitch, yaw) through the network: each start is
/// refined on the squared residuals, then the best is polished on the exact
/// cost.
AngleSolution solve_leg_angles(const HopModel& model, const Vec3& velocity, const Vec2& target_displacement,
                               const Vec3& desired_velocity, const CostWeights& weights = {},
                               const AngleLimits& limits = {}, const SolverSettings& settings = {});

struct BackupCandidate {
  Vec2 target_displacement = Vec2::Zero();
  Vec3 desired_velocity = Vec3::Zero();
};

struct BackupChoice {
  std::size_t index = 0;
  AngleSolution solution;
};

BackupChoice select_backup(const HopModel& model, const Vec3& velocity, std::span<const BackupCandidate> candidates,
                           const CostWeights& weights = {}, const AngleLimits& limits = {},
                           const SolverSettings& settings = {});

/// Periodic straight-line gait: an interstitial velocity (heading +x) and
/// pitch that reproduce themselves while advancing `hop_length` per hop.
struct SteadyGait {
  Vec3 velocity = Vec3::Zero();
  double pitch = 0.0;
  double hop_length = 0.0;

  /// Gait velocity rotated to a planar heading.
  Vec3 velocity_towards(double heading) const;
};

SteadyGait find_steady_gait(const SlipParams& params, double speed, double hop_length,
                            const IntegratorSettings& settings = {});

/// Solve-then-simulate displacement errors (m) for `count` reachable targets
/// drawn by simulating random in-range hops.
std::vector<double> round_trip_errors(const HopModel& model, const SlipParams& params, std::size_t count,
                                      std::uint64_t seed, const SamplingRanges& ranges = {},
                                      const CostWeights& weights = {});

}  // namespace hopnav
