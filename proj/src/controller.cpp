#include "hopnav/controller.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "hopnav/error.hpp"

namespace hopnav {

namespace {

Vec2 rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

Vec3 rotate_planar(const Vec3& v, double angle) {
  const Vec2 xy = rotate(v.head<2>(), angle);
  return {xy.x(), xy.y(), v.z()};
}

Vec5 sample_targets_heading_frame(const TrainingSample& s) {
  const double heading = horizontal_heading(s.velocity);
  const Vec2 d = rotate(s.displacement, -heading);
  const Vec3 v = rotate_planar(s.next_velocity, -heading);
  Vec5 out;
  out << d, v;
  return out;
}

}  // namespace

Vec5 heading_features(const Vec3& velocity, const LegPlacement& placement) {
  Vec5 f;
  f << std::hypot(velocity.x(), velocity.y()), 0.0, velocity.z(), placement.pitch, placement.yaw;
  return f;
}

std::vector<TrainingSample> generate_training_data(const SlipParams& params, std::size_t count, std::uint64_t seed,
                                                   const SamplingRanges& ranges,
                                                   const IntegratorSettings& settings) {
  if (count == 0) throw Error(ErrorCode::InvalidArgument, "sample count must be at least 1");
  params.validate();
  Rng rng(seed);
  std::vector<TrainingSample> samples;
  samples.reserve(count);
  std::size_t draws = 0;
  std::size_t failures = 0;
  const auto exhausted = [&] { return 2 * failures > draws; };
  while (samples.size() < count) {
    ++draws;
    const double speed = rng.uniform(ranges.speed_min, ranges.speed_max);
    const double descent = rng.uniform(ranges.descent_min, ranges.descent_max);
    const double heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
    LegPlacement placement;
    placement.pitch = rng.uniform(ranges.angles.pitch_min, ranges.angles.pitch_max);
    placement.yaw = rng.uniform(ranges.angles.yaw_min, ranges.angles.yaw_max);

    InterstitialState start;
    start.velocity = Vec3(speed * std::cos(descent) * std::cos(heading), speed * std::cos(descent) * std::sin(heading),
                          -speed * std::sin(descent));
    try {
      const InterstitialState next = step_hop(start, placement, params, nullptr, nullptr, settings);
      samples.push_back({start.velocity, placement, next.position - start.position, next.velocity});
    } catch (const Error&) {
      ++failures;
      if (draws >= 1000 && exhausted()) break;
    }
  }
  if (exhausted()) {
    throw Error(ErrorCode::ExhaustedSampling, std::to_string(failures) + " of " + std::to_string(draws) +
                                                  " sampled hops failed; check the SLIP parameters");
  }
  return samples;
}

HopModel::HopModel(std::vector<int> layer_sizes, std::uint64_t seed) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2 || sizes_.front() != 5 || sizes_.back() != 5) {
    throw Error(ErrorCode::InvalidArgument, "hop model maps 5 inputs to 5 outputs");
  }
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    DenseLayer layer;
    layer.weight.resize(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weight(r, c) = rng.uniform(-limit, limit);
    layer.bias = Eigen::VectorXd::Zero(out);
    layers_.push_back(std::move(layer));
  }
}

Vec5 HopModel::evaluate(const Vec5& features) const {
  Eigen::VectorXd a = ((features - input_mean).array() / input_scale.array()).matrix();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::VectorXd z = layers_[l].weight * a + layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.array().tanh().matrix();
    a = std::move(z);
  }
  return (a.array() * output_scale.array()).matrix() + output_mean;
}

Vec5 HopModel::evaluate_with_jacobian(const Vec5& features, Eigen::Matrix<double, 5, 2>& jacobian) const {
  Eigen::VectorXd a = ((features - input_mean).array() / input_scale.array()).matrix();
  Eigen::MatrixXd da = Eigen::MatrixXd::Zero(5, 2);
  da(3, 0) = 1.0 / input_scale(3);
  da(4, 1) = 1.0 / input_scale(4);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::VectorXd z = layers_[l].weight * a + layers_[l].bias;
    Eigen::MatrixXd dz = layers_[l].weight * da;
    if (l + 1 < layers_.size()) {
      z = z.array().tanh().matrix();
      const Eigen::ArrayXd slope = 1.0 - z.array().square();
      dz = (dz.array().colwise() * slope).matrix();
    }
    a = std::move(z);
    da = std::move(dz);
  }
  jacobian = (da.array().colwise() * output_scale.array()).matrix();
  return (a.array() * output_scale.array()).matrix() + output_mean;
}

HopPrediction HopModel::predict(const Vec3& velocity, const LegPlacement& placement) const {
  const double heading = horizontal_heading(velocity);
  const Vec5 out = evaluate(heading_features(velocity, placement));
  HopPrediction p;
  p.displacement = rotate(out.head<2>(), heading);
  p.next_velocity = rotate_planar(out.tail<3>(), heading);
  return p;
}

bool HopModel::operator==(const HopModel& other) const {
  if (sizes_ != other.sizes_ || input_mean != other.input_mean || input_scale != other.input_scale ||
      output_mean != other.output_mean || output_scale != other.output_scale) {
    return false;
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].weight != other.layers_[l].weight || layers_[l].bias != other.layers_[l].bias) return false;
  }
  return true;
}

// Binary layout (little-endian host order):
//   "HNMD" u8:version u32:layer_count u32[layer_count]:sizes
//   f64[5] x4: input mean/scale, output mean/scale
//   u64:sample_count f64:final_loss f64:validation_rmse f64:control_error
//   per dense layer: f64[out*in] row-major weights, f64[out] bias
namespace {

constexpr char kMagic[4] = {'H', 'N', 'M', 'D'};
constexpr std::uint8_t kModelVersion = 1;

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorCode::IoError, "truncated hop model file");
  return v;
}

}  // namespace

void HopModel::write(std::ostream& out) const {
  out.write(kMagic, 4);
  put(out, kModelVersion);
  put(out, static_cast<std::uint32_t>(sizes_.size()));
  for (int s : sizes_) put(out, static_cast<std::uint32_t>(s));
  for (const Vec5* v : {&input_mean, &input_scale, &output_mean, &output_scale})
    for (int i = 0; i < 5; ++i) put(out, (*v)(i));
  put(out, info.sample_count);
  put(out, info.final_loss);
  put(out, info.validation_rmse);
  put(out, info.control_error);
  for (const DenseLayer& layer : layers_) {
    for (int r = 0; r < layer.weight.rows(); ++r)
      for (int c = 0; c < layer.weight.cols(); ++c) put(out, layer.weight(r, c));
    for (int r = 0; r < layer.bias.size(); ++r) put(out, layer.bias(r));
  }
}

HopModel HopModel::read(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorCode::IoError, "not a hop model file");
  const auto version = get<std::uint8_t>(in);
  if (version != kModelVersion) {
    throw Error(ErrorCode::IoError, "unsupported hop model version " + std::to_string(version));
  }
  const auto count = get<std::uint32_t>(in);
  if (count < 2 || count > 64) throw Error(ErrorCode::IoError, "bad layer count in hop model file");
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto s = get<std::uint32_t>(in);
    if (s == 0 || s > 1u << 16) throw Error(ErrorCode::IoError, "bad layer size in hop model file");
    sizes.push_back(static_cast<int>(s));
  }
  HopModel model(sizes, 0);
  for (Vec5* v : {&model.input_mean, &model.input_scale, &model.output_mean, &model.output_scale})
    for (int i = 0; i < 5; ++i) (*v)(i) = get<double>(in);
  model.info.sample_count = get<std::uint64_t>(in);
  model.info.final_loss = get<double>(in);
  model.info.validation_rmse = get<double>(in);
  model.info.control_error = get<double>(in);
  for (DenseLayer& layer : model.layers_) {
    for (int r = 0; r < layer.weight.rows(); ++r)
      for (int c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = get<double>(in);
    for (int r = 0; r < layer.bias.size(); ++r) layer.bias(r) = get<double>(in);
  }
  return model;
}

void HopModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  write(out);
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path);
}

HopModel HopModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return read(in);
}

namespace {

struct Batch {
  Eigen::MatrixXd inputs;   // 5 x n, normalized
  Eigen::MatrixXd targets;  // 5 x n, normalized
};

struct AdamSlot {
  Eigen::MatrixXd m, v;
};

double mse(const std::vector<DenseLayer>& layers, const Batch& batch) {
  Eigen::MatrixXd a = batch.inputs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = (layers[l].weight * a).colwise() + layers[l].bias;
    if (l + 1 < layers.size()) z = z.array().tanh().matrix();
    a = std::move(z);
  }
  return (a - batch.targets).squaredNorm() / static_cast<double>(a.size());
}

}  // namespace

HopModel train(const TrainConfig& config, std::span<const TrainingSample> samples) {
  if (samples.size() < 500) throw Error(ErrorCode::InvalidArgument, "training needs at least 500 samples");
  if (config.epochs < 1 || config.batch_size < 1) throw Error(ErrorCode::InvalidArgument, "bad training schedule");

  std::vector<int> sizes = {5};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(5);
  HopModel model(sizes, derive_seed(config.seed, 0));
  Rng rng(derive_seed(config.seed, 1));

  const std::size_t n = samples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
  const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(config.validation_fraction * n));
  const std::size_t n_train = n - n_val;

  Eigen::MatrixXd raw_x(5, n), raw_y(5, n);
  for (std::size_t i = 0; i < n; ++i) {
    const TrainingSample& s = samples[order[i]];
    raw_x.col(i) = heading_features(s.velocity, s.placement);
    raw_y.col(i) = sample_targets_heading_frame(s);
  }
  const auto train_x = raw_x.rightCols(n_train);
  const auto train_y = raw_y.rightCols(n_train);
  for (int f = 0; f < 5; ++f) {
    const auto stats = [&](const auto& row, double& mean, double& scale) {
      mean = row.mean();
      const double var = (row.array() - mean).square().mean();
      scale = var > 1e-24 ? std::sqrt(var) : 1.0;
    };
    stats(train_x.row(f), model.input_mean(f), model.input_scale(f));
    stats(train_y.row(f), model.output_mean(f), model.output_scale(f));
  }
  const auto normalize = [](const Eigen::MatrixXd& m, const Vec5& mean, const Vec5& scale) {
    return Eigen::MatrixXd(((m.colwise() - mean).array().colwise() / scale.array()).matrix());
  };
  Batch all_train{normalize(train_x, model.input_mean, model.input_scale),
                  normalize(train_y, model.output_mean, model.output_scale)};
  Batch validation{normalize(raw_x.leftCols(n_val), model.input_mean, model.input_scale),
                   normalize(raw_y.leftCols(n_val), model.output_mean, model.output_scale)};

  std::vector<DenseLayer>& layers = model.layers();
  const std::size_t depth = layers.size();
  std::vector<AdamSlot> w_slots(depth), b_slots(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    w_slots[l] = {Eigen::MatrixXd::Zero(layers[l].weight.rows(), layers[l].weight.cols()),
                  Eigen::MatrixXd::Zero(layers[l].weight.rows(), layers[l].weight.cols())};
    b_slots[l] = {Eigen::MatrixXd::Zero(layers[l].bias.size(), 1), Eigen::MatrixXd::Zero(layers[l].bias.size(), 1)};
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  long step = 0;

  std::vector<DenseLayer> best = layers;
  double best_val = mse(layers, validation);
  double last_loss = std::numeric_limits<double>::quiet_NaN();

  std::vector<std::size_t> perm(n_train);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<Eigen::MatrixXd> acts(depth + 1);
  const auto bs = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / config.epochs));
    for (std::size_t i = n_train - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n_train; start += bs) {
      const std::size_t m = std::min(bs, n_train - start);
      Eigen::MatrixXd x(5, m), t(5, m);
      for (std::size_t j = 0; j < m; ++j) {
        x.col(j) = all_train.inputs.col(perm[start + j]);
        t.col(j) = all_train.targets.col(perm[start + j]);
      }
      acts[0] = std::move(x);
      for (std::size_t l = 0; l < depth; ++l) {
        Eigen::MatrixXd z = (layers[l].weight * acts[l]).colwise() + layers[l].bias;
        if (l + 1 < depth) z = z.array().tanh().matrix();
        acts[l + 1] = std::move(z);
      }
      Eigen::MatrixXd delta = acts[depth] - t;
      epoch_loss += delta.squaredNorm();
      delta *= 2.0 / static_cast<double>(delta.size());
      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t l = depth; l-- > 0;) {
        const Eigen::MatrixXd grad_w = delta * acts[l].transpose();
        const Eigen::VectorXd grad_b = delta.rowwise().sum();
        if (l > 0) delta = ((layers[l].weight.transpose() * delta).array() * (1.0 - acts[l].array().square())).matrix();
        const auto adam = [&](AdamSlot& slot, auto& param, const auto& grad) {
          slot.m = beta1 * slot.m + (1.0 - beta1) * grad;
          slot.v = beta2 * slot.v + (1.0 - beta2) * grad.cwiseAbs2();
          param.array() -= lr * (slot.m.array() / c1) / ((slot.v.array() / c2).sqrt() + adam_eps);
        };
        adam(w_slots[l], layers[l].weight, grad_w);
        Eigen::MatrixXd bias_col = layers[l].bias;
        adam(b_slots[l], bias_col, Eigen::MatrixXd(grad_b));
        layers[l].bias = bias_col.col(0);
      }
    }
    last_loss = epoch_loss / static_cast<double>(n_train * 5);
    if (!std::isfinite(last_loss)) throw Error(ErrorCode::Diverged, "training loss is not finite");
    const double val = mse(layers, validation);
    if (val < best_val) {
      best_val = val;
      best = layers;
    }
  }
  layers = best;
  model.info.sample_count = n;
  model.info.final_loss = last_loss;

  std::vector<TrainingSample> held_out;
  for (std::size_t i = 0; i < n_val; ++i) held_out.push_back(samples[order[i]]);
  model.info.validation_rmse = displacement_rmse(model, held_out);
  return model;
}

double displacement_rmse(const HopModel& model, std::span<const TrainingSample> samples) {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  for (const TrainingSample& s : samples) {
    sum += (model.predict(s.velocity, s.placement).displacement - s.displacement).squaredNorm();
  }
  return std::sqrt(sum / (2.0 * static_cast<double>(samples.size())));
}

double bound_penalty(const LegPlacement& p, const AngleLimits& limits) {
  return std::max({p.pitch - limits.pitch_max, limits.pitch_min - p.pitch, 0.0}) +
         std::max({p.yaw - limits.yaw_max, limits.yaw_min - p.yaw, 0.0});
}

namespace {

// Cost evaluation in the heading frame of the current velocity. Only pitch
// and yaw vary during a solve, so the first layer's fixed inputs are folded
// into its bias and the forward pass reuses preallocated buffers.
class LocalProblem {
 public:
  LocalProblem(const HopModel& model, const Vec5& features, const Vec2& target, const Vec3& desired,
               const CostWeights& weights, const AngleLimits& limits)
      : model_(model), target_(target), desired_(desired), weights_(weights), limits_(limits) {
    const auto& layers = model.layers();
    Vec5 fixed = ((features - model.input_mean).array() / model.input_scale.array()).matrix();
    fixed(3) = fixed(4) = 0.0;
    base_ = layers[0].weight * fixed + layers[0].bias;
    d_pitch_ = layers[0].weight.col(3) / model.input_scale(3);
    d_yaw_ = layers[0].weight.col(4) / model.input_scale(4);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      acts_.emplace_back(layers[l].weight.rows(), 3);
      if (l > 0) pre_.emplace_back(layers[l].weight.rows(), 3);
    }
  }

  double value(const LegPlacement& p) const { return cost(forward(p, false), p); }

  double value_and_gradient(const LegPlacement& p, Vec2& grad) const {
    const Vec5 y = forward(p, true);
    const Eigen::Matrix<double, 5, 2> jac =
        (acts_.back().rightCols<2>().array().colwise() * model_.output_scale.array()).matrix();
    grad.setZero();
    const Vec2 dd = y.head<2>() - target_;
    const Vec3 dv = y.tail<3>() - desired_;
    if (dd.norm() > 0.0) grad += weights_.displacement * jac.topRows<2>().transpose() * dd / dd.norm();
    if (dv.norm() > 0.0) grad += weights_.velocity * jac.bottomRows<3>().transpose() * dv / dv.norm();
    if (p.pitch > limits_.pitch_max) grad.x() += weights_.bound;
    if (p.pitch < limits_.pitch_min) grad.x() -= weights_.bound;
    if (p.yaw > limits_.yaw_max) grad.y() += weights_.bound;
    if (p.yaw < limits_.yaw_min) grad.y() -= weights_.bound;
    return cost(y, p);
  }

  /// Squared-residual surrogate r = (c1 dd, c2 dv, c3 bound) and dr/dtheta.
  double surrogate(const LegPlacement& p, Eigen::Matrix<double, 7, 1>& r, Eigen::Matrix<double, 7, 2>& jr) const {
    const Vec5 y = forward(p, true);
    const Eigen::Matrix<double, 5, 2> jac =
        (acts_.back().rightCols<2>().array().colwise() * model_.output_scale.array()).matrix();
    r.head<2>() = weights_.displacement * (y.head<2>() - target_);
    r.segment<3>(2) = weights_.velocity * (y.tail<3>() - desired_);
    jr.topRows<2>() = weights_.displacement * jac.topRows<2>();
    jr.middleRows<3>(2) = weights_.velocity * jac.bottomRows<3>();
    jr.bottomRows<2>().setZero();
    r(5) = r(6) = 0.0;
    if (p.pitch > limits_.pitch_max) r(5) = weights_.bound * (p.pitch - limits_.pitch_max), jr(5, 0) = weights_.bound;
    if (p.pitch < limits_.pitch_min) r(5) = weights_.bound * (p.pitch - limits_.pitch_min), jr(5, 0) = weights_.bound;
    if (p.yaw > limits_.yaw_max) r(6) = weights_.bound * (p.yaw - limits_.yaw_max), jr(6, 1) = weights_.bound;
    if (p.yaw < limits_.yaw_min) r(6) = weights_.bound * (p.yaw - limits_.yaw_min), jr(6, 1) = weights_.bound;
    return cost(y, p);
  }

  HopPrediction prediction(const LegPlacement& p) const {
    const Vec5 y = forward(p, false);
    return {y.head<2>(), y.tail<3>()};
  }

 private:
  double cost(const Vec5& out, const LegPlacement& p) const {
    return weights_.displacement * (out.head<2>() - target_).norm() +
           weights_.velocity * (out.tail<3>() - desired_).norm() + weights_.bound * bound_penalty(p, limits_);
  }

  // Columns: activation, d/d(pitch), d/d(yaw).
  Vec5 forward(const LegPlacement& p, bool with_jacobian) const {
    const auto& layers = model_.layers();
    const std::size_t depth = layers.size();
    const int cols = with_jacobian ? 3 : 1;
    Eigen::MatrixXd& a0 = acts_[0];
    a0.col(0) = base_ + d_pitch_ * (p.pitch - model_.input_mean(3)) + d_yaw_ * (p.yaw - model_.input_mean(4));
    if (with_jacobian) {
      a0.col(1) = d_pitch_;
      a0.col(2) = d_yaw_;
    }
    for (std::size_t l = 0; l < depth; ++l) {
      Eigen::MatrixXd& a = acts_[l];
      if (l > 0) {
        Eigen::MatrixXd& z = pre_[l - 1];
        z.leftCols(cols).noalias() = layers[l].weight * acts_[l - 1].leftCols(cols);
        z.col(0) += layers[l].bias;
        a.leftCols(cols) = z.leftCols(cols);
      }
      if (l + 1 < depth) {
        a.col(0) = a.col(0).array().tanh().matrix();
        if (with_jacobian) {
          const Eigen::ArrayXd slope = 1.0 - a.col(0).array().square();
          a.col(1).array() *= slope;
          a.col(2).array() *= slope;
        }
      }
    }
    return (acts_.back().col(0).array() * model_.output_scale.array()).matrix() + model_.output_mean;
  }

  const HopModel& model_;
  Vec2 target_;
  Vec3 desired_;
  CostWeights weights_;
  AngleLimits limits_;
  Eigen::VectorXd base_, d_pitch_, d_yaw_;
  mutable std::vector<Eigen::MatrixXd> acts_, pre_;
};

LegPlacement shifted(const LegPlacement& p, double d_pitch, double d_yaw) {
  return {p.pitch + d_pitch, p.yaw + d_yaw};
}

}  // namespace

double hop_cost(const HopModel& model, const Vec3& velocity, const Vec2& target_displacement,
                const Vec3& desired_velocity, const CostWeights& weights, const LegPlacement& placement,
                const AngleLimits& limits) {
  const HopPrediction p = model.predict(velocity, placement);
  return weights.displacement * (p.displacement - target_displacement).norm() +
         weights.velocity * (p.next_velocity - desired_velocity).norm() +
         weights.bound * bound_penalty(placement, limits);
}

AngleSolution solve_leg_angles(const HopModel& model, const Vec3& velocity, const Vec2& target_displacement,
                               const Vec3& desired_velocity, const CostWeights& weights, const AngleLimits& limits,
                               const SolverSettings& settings) {
  const double heading = horizontal_heading(velocity);
  const LocalProblem problem(model, heading_features(velocity, {}), rotate(target_displacement, -heading),
                             rotate_planar(desired_velocity, -heading), weights, limits);

  // Normalized-gradient descent with an adaptive step; coordinate probes
  // take over where the gradient vanishes.
  const auto descend = [&](LegPlacement& p, double& cost, double step, int iterations, double min_step) {
    Vec2 grad;
    cost = problem.value_and_gradient(p, grad);
    for (int it = 0; it < iterations && step >= min_step; ++it) {
      const double gn = grad.norm();
      if (gn < 1e-12) {
        bool moved = false;
        for (const auto& [da, db] : {std::pair{step, 0.0}, {-step, 0.0}, {0.0, step}, {0.0, -step}}) {
          const LegPlacement trial = shifted(p, da, db);
          if (problem.value(trial) < cost) {
            p = trial;
            cost = problem.value_and_gradient(p, grad);
            moved = true;
            break;
          }
        }
        step *= moved ? 1.2 : 0.5;
        continue;
      }
      const LegPlacement trial = shifted(p, -step * grad.x() / gn, -step * grad.y() / gn);
      Vec2 trial_grad;
      const double c = problem.value_and_gradient(trial, trial_grad);
      if (c < cost) {
        p = trial;
        cost = c;
        grad = trial_grad;
        step *= 1.2;
      } else {
        step *= 0.5;
      }
    }
  };

  // Levenberg-Marquardt on the squared residuals; the exact cost of every
  // iterate is tracked so the best point seen is kept.
  const auto refine = [&](LegPlacement& p, double& cost, int iterations) {
    Eigen::Matrix<double, 7, 1> r, r_trial;
    Eigen::Matrix<double, 7, 2> jr, jr_trial;
    cost = problem.surrogate(p, r, jr);
    LegPlacement best = p;
    double best_cost = cost;
    double lambda = 1e-3;
    for (int it = 0; it < iterations; ++it) {
      const Eigen::Matrix2d h = jr.transpose() * jr;
      const Vec2 g = jr.transpose() * r;
      const Eigen::Matrix2d damped = h + lambda * (h.diagonal().asDiagonal().toDenseMatrix() + 1e-9 * Eigen::Matrix2d::Identity());
      Vec2 delta = -damped.ldlt().solve(g);
      if (!delta.allFinite()) break;
      // Keep single steps inside a fraction of the angle box.
      const double cap = 0.25;
      if (delta.norm() > cap) delta *= cap / delta.norm();
      const LegPlacement trial = shifted(p, delta.x(), delta.y());
      const double c = problem.surrogate(trial, r_trial, jr_trial);
      if (r_trial.squaredNorm() < r.squaredNorm()) {
        p = trial;
        r = r_trial;
        jr = jr_trial;
        lambda = std::max(lambda * 0.3, 1e-9);
        if (c < best_cost) {
          best_cost = c;
          best = p;
        }
        if (delta.norm() < 1e-10) break;
      } else {
        lambda *= 10.0;
        if (lambda > 1e8) break;
      }
    }
    p = best;
    cost = best_cost;
  };

  LegPlacement best_p;
  double best_cost = std::numeric_limits<double>::infinity();
  const int g = std::max(1, settings.grid);
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < g; ++j) {
      LegPlacement p{limits.pitch_min + (i + 0.5) * (limits.pitch_max - limits.pitch_min) / g,
                     limits.yaw_min + (j + 0.5) * (limits.yaw_max - limits.yaw_min) / g};
      double cost = 0.0;
      refine(p, cost, settings.refine_iterations);
      if (cost < best_cost) {
        best_cost = cost;
        best_p = p;
      }
    }
  }
  // The exact cost has kinks the surrogate smooths over; finish on it.
  descend(best_p, best_cost, settings.initial_step, settings.iterations, settings.min_step);

  AngleSolution solution;
  solution.placement = best_p;
  solution.cost = best_cost;
  solution.prediction = model.predict(velocity, best_p);
  return solution;
}

BackupChoice select_backup(const HopModel& model, const Vec3& velocity, std::span<const BackupCandidate> candidates,
                           const CostWeights& weights, const AngleLimits& limits, const SolverSettings& settings) {
  if (candidates.empty()) throw Error(ErrorCode::InvalidArgument, "backup selection needs at least one candidate");
  BackupChoice best;
  best.solution.cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    AngleSolution s = solve_leg_angles(model, velocity, candidates[i].target_displacement,
                                       candidates[i].desired_velocity, weights, limits, settings);
    if (s.cost < best.solution.cost) {
      best.index = i;
      best.solution = s;
    }
  }
  return best;
}

Vec3 SteadyGait::velocity_towards(double heading) const { return rotate_planar(velocity, heading); }

SteadyGait find_steady_gait(const SlipParams& params, double speed, double hop_length,
                            const IntegratorSettings& settings) {
  params.validate();
  const auto hop = [&](double descent, double pitch, InterstitialState& next) {
    InterstitialState start;
    start.velocity = Vec3(speed * std::cos(descent), 0.0, -speed * std::sin(descent));
    try {
      next = step_hop(start, {pitch, 0.0}, params, nullptr, nullptr, settings);
      return next.position.x() > 0.0;
    } catch (const Error&) {
      return false;
    }
  };
  const auto bisect = [](double lo, double hi, double f_lo, const auto& f) {
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      const double f_mid = f(mid);
      if ((f_mid < 0.0) == (f_lo < 0.0)) {
        lo = mid;
        f_lo = f_mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };

  // Pitch at which the vertical velocity repeats, searched from vertical down
  // along the forward-moving branch.
  const auto periodic_pitch = [&](double descent, double& pitch, double& length) {
    const double vz_in = -speed * std::sin(descent);
    const auto residual = [&](double a) {
      InterstitialState next;
      return hop(descent, a, next) ? next.velocity.z() - vz_in : std::numeric_limits<double>::quiet_NaN();
    };
    double prev_a = std::numbers::pi / 2;
    double prev_r = residual(prev_a);
    for (double a = prev_a - 0.002; a > std::numbers::pi / 4; a -= 0.002) {
      const double r = residual(a);
      if (std::isfinite(r) && std::isfinite(prev_r) && (r < 0.0) != (prev_r < 0.0)) {
        pitch = bisect(a, prev_a, r, residual);
        InterstitialState next;
        if (!hop(descent, pitch, next)) return false;
        length = next.position.x();
        return true;
      }
      prev_a = a;
      prev_r = r;
    }
    return false;
  };

  const auto length_error = [&](double descent) {
    double pitch = 0.0, length = 0.0;
    return periodic_pitch(descent, pitch, length) ? length - hop_length : std::numeric_limits<double>::quiet_NaN();
  };
  const double deg = std::numbers::pi / 180.0;
  double prev_d = 30.0 * deg;
  double prev_e = length_error(prev_d);
  for (double d = 31.0 * deg; d < 88.0 * deg; d += 1.0 * deg) {
    const double e = length_error(d);
    if (std::isfinite(e) && std::isfinite(prev_e) && (e < 0.0) != (prev_e < 0.0)) {
      const double descent = bisect(prev_d, d, prev_e, [&](double x) {
        const double v = length_error(x);
        return std::isfinite(v) ? v : prev_e;
      });
      SteadyGait gait;
      gait.velocity = Vec3(speed * std::cos(descent), 0.0, -speed * std::sin(descent));
      if (!periodic_pitch(descent, gait.pitch, gait.hop_length)) break;
      return gait;
    }
    prev_d = d;
    prev_e = e;
  }
  throw Error(ErrorCode::InvalidArgument, "no periodic gait with the requested hop length at this speed");
}

std::vector<double> round_trip_errors(const HopModel& model, const SlipParams& params, std::size_t count,
                                      std::uint64_t seed, const SamplingRanges& ranges, const CostWeights& weights) {
  const std::vector<TrainingSample> targets = generate_training_data(params, count, seed, ranges);
  std::vector<double> errors;
  errors.reserve(count);
  for (const TrainingSample& t : targets) {
    const AngleSolution sol = solve_leg_angles(model, t.velocity, t.displacement, t.next_velocity, weights, ranges.angles);
    InterstitialState start;
    start.velocity = t.velocity;
    try {
      const InterstitialState next = step_hop(start, sol.placement, params);
      errors.push_back((next.position - t.displacement).norm());
    } catch (const Error&) {
      errors.push_back(std::numeric_limits<double>::infinity());
    }
  }
  return errors;
}

}  // namespace hopnav
