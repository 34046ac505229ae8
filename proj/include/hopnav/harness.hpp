#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hopnav/automata.hpp"
#include "hopnav/controller.hpp"
#include "hopnav/gp.hpp"
#include "hopnav/synthesis.hpp"

namespace hopnav {

/// Inclusive rectangle of cell indices.
struct CellRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool contains(int ix, int iy) const { return ix >= x0 && ix <= x1 && iy >= y0 && iy <= y1; }
  bool operator==(const CellRect&) const = default;
};

struct LabelRegion {
  std::string name;
  std::vector<CellRect> cells;
};

/// Reward granted on every entry into one of the cells.
struct RewardRegion {
  std::string name;
  double value = 0.0;
  std::vector<CellRect> cells;
};

struct PerturbationSpec {
  std::uint64_t seed = 17;
  double lengthscale = 3.0;  // m
  double sigma = 0.3;        // m
  double noise_sigma = 0.1;  // m
  double noise_support = 0.2;
  bool enabled = true;
};

struct EnvironmentConfig {
  std::string name = "world";
  Vec2 lower = Vec2::Zero();
  Vec2 upper = Vec2(15.0, 15.0);
  double cell_size = 1.0;
  std::array<int, 2> start = {0, 0};  // cell (ix, iy)
  std::vector<LabelRegion> labels;
  std::vector<RewardRegion> rewards;
  PerturbationSpec perturbation;
  /// "until" for the builtin automaton, otherwise DRA text or a path to it.
  std::string dra = "until";
  std::string goal = "Goal";
  std::string hazard = "Haz";

  /// Throws ConfigError.
  void validate() const;
  Partition partition() const;
  Dra automaton() const;
  /// Per-cell reward (sum over regions containing the cell).
  std::vector<double> reward_map() const;
  PerturbationField perturbation_field() const;
  int start_cell() const;
};

/// 15 x 15 m world with 1 m cells. Variant 'A' puts the 20-reward region in
/// the upper left and the 5-reward region in the lower left; 'B' swaps them.
EnvironmentConfig case_study_environment(char variant = 'A');

/// 3 x 3 world, goal next to the start, no perturbation.
EnvironmentConfig micro_environment();

enum class RewardMode { Known, Unknown };

struct RunConfig {
  std::uint64_t seed = 1;
  int run_index = 0;  // per-run seed stream within an experiment
  double p_sat = 0.65;
  int batch = 50;
  int max_batches = 100;  // step cap = batch * max_batches
  double p_rl_ee = 0.5;
  double c = 0.5;
  double eps = 0.005;
  RewardMode reward_mode = RewardMode::Known;
  int runs = 1;
  std::string output_dir = "out";

  std::size_t inducing = 50;
  KernelSettings kernel;
  double z_score = 2.0;
  double control_error = -1.0;  // m; negative takes the model's measured value
  double backup_threshold = 0.3;  // cell widths
  CostWeights weights;
  QParams q;

  /// Throws ConfigError.
  void validate() const;
  int step_cap() const { return batch * max_batches; }
};

enum class Outcome { Satisfied, Violated, StepCap };

const char* outcome_name(Outcome o);
const char* branch_name(Branch b);
const char* mode_name(PolicyMode m);

struct HopRecord {
  int hop = 0;
  Vec2 start = Vec2::Zero();
  Vec2 end = Vec2::Zero();
  int cell = 0;           // cell at the start of the hop
  int product_state = 0;  // product state at the start of the hop
  int next_cell = -1;     // -1 when the landing left the workspace
  int requested_action = 0;
  int action = 0;         // executed action (differs on backup)
  bool backup = false;
  Branch branch = Branch::Ltl;
  PolicyMode mode = PolicyMode::Exploration;
  LegPlacement placement;
  double cost = 0.0;
  Vec2 predicted = Vec2::Zero();
  Vec2 realized = Vec2::Zero();
  double reward = 0.0;
};

/// GP state and synthesis verdict at a batch boundary.
struct BatchRecord {
  int step = 0;
  int samples = 0;
  PolicyMode mode = PolicyMode::Exploration;
  bool switched = false;
  bool recovery = false;  // no nonviolating action at the current state
  double p_lower = 0.0;   // worst-case satisfaction probability at the current state
  std::vector<double> mean_x, mean_y, std_x, std_y;  // per cell
};

struct RunLog {
  std::uint64_t seed = 0;
  int run_index = 0;
  std::vector<HopRecord> hops;
  std::vector<BatchRecord> batches;
  Outcome outcome = Outcome::StepCap;
  int steps = 0;
  double total_reward = 0.0;
  int switch_step = -1;  // hop index at which goal reaching began, -1 if never

  bool satisfied() const { return outcome == Outcome::Satisfied; }
};

/// Reward knowledge carried between runs of an unknown-reward experiment.
struct LearnedReward {
  std::vector<double> reward;  // per cell, observed on entry
  QTable q;
};

struct SweepCell {
  double p = 0.0;
  double eps = 0.0;
  int runs = 0;
  int completed = 0;
  double mean_reward = 0.0;  // over completed runs (NaN if none)
  double mean_steps = 0.0;
};

struct SweepResult {
  std::vector<double> p_values;
  std::vector<double> eps_values;
  std::vector<SweepCell> cells;  // row-major over (p, eps)

  const SweepCell& at(std::size_t ip, std::size_t ie) const { return cells[ip * eps_values.size() + ie]; }
};

/// Trained hop model plus the cached steady gait used for desired velocities.
class Runner {
 public:
  Runner(HopModel model, const SlipParams& params = {}, double speed = 4.0);
  Runner(HopModel model, const SlipParams& params, const SteadyGait& gait);

  const HopModel& model() const { return model_; }
  const SteadyGait& gait() const { return gait_; }
  const SlipParams& params() const { return params_; }

  /// `knowledge` carries the Q-table and learned reward in unknown mode.
  RunLog run_episode(const EnvironmentConfig& env, const RunConfig& run, LearnedReward* knowledge = nullptr) const;

  std::vector<RunLog> run_experiment(const EnvironmentConfig& env, const RunConfig& run) const;

  /// Sets P_RL,ee = C = p for each grid cell; every cell reuses the same run
  /// seeds.
  SweepResult sweep_switching(const EnvironmentConfig& env, const RunConfig& base, std::vector<double> p_values,
                              std::vector<double> eps_values, int runs) const;

 private:
  HopModel model_;
  SlipParams params_;
  SteadyGait gait_;
};

// JSON (de)serialization. Environment and run configs accept partial objects;
// missing keys keep their defaults.
void to_json(nlohmann::json& j, const EnvironmentConfig& env);
void from_json(const nlohmann::json& j, EnvironmentConfig& env);
void to_json(nlohmann::json& j, const RunConfig& run);
void from_json(const nlohmann::json& j, RunConfig& run);
void to_json(nlohmann::json& j, const RunLog& log);
void from_json(const nlohmann::json& j, RunLog& log);
void to_json(nlohmann::json& j, const SweepResult& sweep);

EnvironmentConfig load_environment(const std::string& path);
RunConfig load_run_config(const std::string& path);

std::string trajectory_csv(const RunLog& log);
std::string metrics_csv(std::span<const RunLog> logs);
std::string sweep_csv(const SweepResult& sweep);
std::string trajectory_svg(const EnvironmentConfig& env, const RunLog& log);

/// Writes trajectory_<i>.csv, trajectory_<i>.svg, log_<i>.json and
/// metrics.csv. Throws IoError.
void emit_outputs(const EnvironmentConfig& env, std::span<const RunLog> logs, const std::string& directory);
void emit_sweep(const SweepResult& sweep, const std::string& directory);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace hopnav
