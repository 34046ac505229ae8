#include "hopnav/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "hopnav/error.hpp"

namespace hopnav {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

double action_heading(int action) {
  switch (kHopActions[action].direction) {
    case Direction::North: return std::numbers::pi / 2;
    case Direction::East: return 0.0;
    case Direction::South: return -std::numbers::pi / 2;
    case Direction::West: return std::numbers::pi;
  }
  return 0.0;
}

}  // namespace

// ---------------------------------------------------------------- environment

void EnvironmentConfig::validate() const {
  if (!(cell_size > 0.0)) config_error("cell_size must be positive");
  if (!(upper.x() > lower.x() && upper.y() > lower.y())) config_error("upper bound must exceed lower bound");
  Partition part;
  try {
    part = build_partition(lower, upper, cell_size);
  } catch (const Error& e) {
    config_error(e.what());
  }
  const auto inside = [&](const CellRect& r) {
    return r.x0 >= 0 && r.y0 >= 0 && r.x0 <= r.x1 && r.y0 <= r.y1 && r.x1 < part.nx() && r.y1 < part.ny();
  };
  if (start[0] < 0 || start[1] < 0 || start[0] >= part.nx() || start[1] >= part.ny()) {
    config_error("start cell outside the workspace");
  }
  for (const auto& l : labels) {
    if (l.name.empty()) config_error("label with empty name");
    for (const auto& r : l.cells) {
      if (!inside(r)) config_error("label rectangle of '" + l.name + "' outside the workspace");
    }
  }
  for (const auto& w : rewards) {
    if (!std::isfinite(w.value)) config_error("reward of '" + w.name + "' is not finite");
    for (const auto& r : w.cells) {
      if (!inside(r)) config_error("reward rectangle of '" + w.name + "' outside the workspace");
    }
  }
  if (goal == hazard) config_error("goal and hazard propositions must differ");
  const Partition labelled = partition();
  for (int q = 0; q < labelled.size(); ++q) {
    if (labelled.has_label(q, goal) && labelled.has_label(q, hazard)) {
      config_error("cell " + std::to_string(q) + " is labelled both " + goal + " and " + hazard);
    }
  }
  if (!(perturbation.noise_sigma >= 0.0 && perturbation.noise_support >= 0.0)) config_error("noise must be >= 0");
  if (perturbation.noise_sigma > 0.0 && perturbation.noise_support <= 0.0) {
    config_error("noise support must be positive when sigma is");
  }
  if (!(perturbation.lengthscale > 0.0 && perturbation.sigma >= 0.0)) config_error("bad perturbation kernel");
  try {
    (void)automaton();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    config_error(std::string("automaton: ") + e.what());
  }
}

Partition EnvironmentConfig::partition() const {
  Partition part = build_partition(lower, upper, cell_size);
  part.add_proposition(goal);
  part.add_proposition(hazard);
  for (const auto& l : labels) {
    part.add_proposition(l.name);
    for (const auto& r : l.cells) {
      for (int iy = r.y0; iy <= r.y1; ++iy) {
        for (int ix = r.x0; ix <= r.x1; ++ix) part.add_label(part.index(ix, iy), l.name);
      }
    }
  }
  return part;
}

Dra EnvironmentConfig::automaton() const {
  if (dra == "until") return build_until_dra(goal, hazard);
  if (dra.find('\n') != std::string::npos) return parse_dra(dra);
  return parse_dra(read_text(dra));
}

std::vector<double> EnvironmentConfig::reward_map() const {
  const Partition part = build_partition(lower, upper, cell_size);
  std::vector<double> w(static_cast<std::size_t>(part.size()), 0.0);
  for (const auto& region : rewards) {
    for (const auto& r : region.cells) {
      for (int iy = r.y0; iy <= r.y1; ++iy) {
        for (int ix = r.x0; ix <= r.x1; ++ix) w[part.index(ix, iy)] += region.value;
      }
    }
  }
  return w;
}

PerturbationField EnvironmentConfig::perturbation_field() const {
  PerturbationField f;
  f.noise_sigma = perturbation.noise_sigma;
  f.noise_support = perturbation.noise_support;
  if (!perturbation.enabled || perturbation.sigma == 0.0) {
    f.displacement = [](const Vec2&) { return Vec2(Vec2::Zero()); };
    return f;
  }
  const Partition part = build_partition(lower, upper, cell_size);
  const Vec2 origin = lower + Vec2::Constant(0.5 * cell_size);
  const Vec2 spacing = Vec2::Constant(cell_size);
  auto fx = std::make_shared<GridField>(origin, spacing, part.nx(), part.ny(), perturbation.lengthscale,
                                        perturbation.sigma, derive_seed(perturbation.seed, 0));
  auto fy = std::make_shared<GridField>(origin, spacing, part.nx(), part.ny(), perturbation.lengthscale,
                                        perturbation.sigma, derive_seed(perturbation.seed, 1));
  f.displacement = [fx, fy](const Vec2& p) { return Vec2((*fx)(p), (*fy)(p)); };
  return f;
}

int EnvironmentConfig::start_cell() const {
  return build_partition(lower, upper, cell_size).index(start[0], start[1]);
}

EnvironmentConfig case_study_environment(char variant) {
  if (variant != 'A' && variant != 'B') config_error("case-study variant must be A or B");
  EnvironmentConfig env;
  env.name = std::string("case-study-") + variant;
  env.start = {7, 2};
  env.labels = {{"Goal", {{11, 12, 11, 12}}},
                {"Haz", {{6, 7, 9, 8}, {12, 5, 13, 6}, {6, 12, 7, 13}}}};
  const std::vector<CellRect> upper_left = {{2, 10, 4, 12}};
  const std::vector<CellRect> lower_left = {{2, 2, 4, 4}};
  const bool a_high = variant == 'A';
  env.rewards = {{"A", 20.0, a_high ? upper_left : lower_left},
                 {"B", 5.0, a_high ? lower_left : upper_left},
                 {"WeakHaz", -0.5, {{4, 6, 5, 7}, {9, 9, 10, 10}}}};
  return env;
}

EnvironmentConfig micro_environment() {
  EnvironmentConfig env;
  env.name = "micro";
  env.upper = Vec2(3.0, 3.0);
  env.start = {0, 1};
  env.labels = {{"Goal", {{2, 1, 2, 1}}}, {"Haz", {{1, 0, 1, 0}}}};
  env.perturbation.enabled = false;
  env.perturbation.noise_sigma = 0.0;
  env.perturbation.noise_support = 0.0;
  return env;
}

// ---------------------------------------------------------------- run config

void RunConfig::validate() const {
  if (batch < 1) config_error("batch length must be >= 1");
  if (max_batches < 1) config_error("max_batches must be >= 1");
  if (!(p_sat >= 0.0 && p_sat < 1.0)) config_error("P_sat must lie in [0, 1)");
  if (!(p_rl_ee >= 0.0 && p_rl_ee <= 1.0)) config_error("P_RL,ee must lie in [0, 1]");
  if (!(c >= 0.0 && c < 1.0)) config_error("C must lie in [0, 1)");
  if (!(eps >= 0.0 && eps <= 1.0)) config_error("epsilon must lie in [0, 1]");
  if (runs < 1) config_error("runs must be >= 1");
  if (inducing < 1) config_error("inducing count must be >= 1");
  if (!(z_score >= 0.0)) config_error("z_score must be >= 0");
  if (!(backup_threshold > 0.0)) config_error("backup threshold must be positive");
  if (!(kernel.lengthscale > 0.0 && kernel.signal_sigma > 0.0 && kernel.noise_sigma > 0.0)) {
    config_error("kernel hyperparameters must be positive");
  }
  if (!(q.gamma >= 0.0 && q.gamma < 1.0)) config_error("gamma must lie in [0, 1)");
}

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Satisfied: return "satisfied";
    case Outcome::Violated: return "violated";
    case Outcome::StepCap: return "step_cap";
  }
  return "?";
}

const char* branch_name(Branch b) { return b == Branch::Ltl ? "ltl" : "rl"; }
const char* mode_name(PolicyMode m) { return m == PolicyMode::Exploration ? "exploration" : "goal_reaching"; }

// ---------------------------------------------------------------- episode

namespace {

struct Synthesis {
  MtPimdp pm;
  ActionMap eligible;
  std::vector<int> ltl;
  QTable offline_q;
  std::optional<SwitchingPolicy> policy;
  bool recovery = false;
  double p_lower = 0.0;
};

class Episode {
 public:
  Episode(const Runner& runner, const EnvironmentConfig& env, const RunConfig& run, LearnedReward* knowledge)
      : runner_(runner),
        env_(env),
        run_(run),
        knowledge_(knowledge),
        part_(env.partition()),
        dra_(env.automaton()),
        truth_(env.reward_map()),
        field_(env.perturbation_field()),
        noise_{env.perturbation.noise_sigma, env.perturbation.noise_support},
        seed_(derive_seed(run.seed, static_cast<std::uint64_t>(run.run_index))),
        noise_rng_(derive_seed(seed_, 1)) {
    obs_.resize(static_cast<std::size_t>(part_.size()));
    for (int q = 0; q < part_.size(); ++q) obs_[q] = project_label(part_.label(q), part_.propositions(), dra_);
    ctrl_err_ = run.control_error >= 0.0 ? run.control_error : runner.model().info.control_error;
    goal_ = part_.proposition(env.goal);
    hazard_ = part_.proposition(env.hazard);
    if (run.reward_mode == RewardMode::Unknown) {
      if (!knowledge_) {
        local_.reward.assign(static_cast<std::size_t>(part_.size()), 0.0);
        knowledge_ = &local_;
      }
      const int states = (part_.size() + 1) * dra_.state_count;
      if (knowledge_->q.size() != states) knowledge_->q = QTable(states, run.q);
      if (static_cast<int>(knowledge_->reward.size()) != part_.size()) {
        knowledge_->reward.assign(static_cast<std::size_t>(part_.size()), 0.0);
      }
    }
  }

  RunLog run() {
    RunLog log;
    log.seed = run_.seed;
    log.run_index = run_.run_index;

    q_ = env_.start_cell();
    s_ = dra_.next(dra_.initial, obs_[q_]);
    state_.position = part_.center(q_);
    state_.velocity = runner_.gait().velocity_towards(0.0);
    state_.hop = 0;
    gps_ = prior_gps(run_.kernel);

    if (const auto end = terminal(q_)) {
      log.outcome = *end;
      return log;
    }
    synthesize(true);
    log.batches.push_back(batch_record(0));
    if (mode_ == PolicyMode::GoalReaching) {
      log.switch_step = 0;
      log.batches.back().switched = true;
    }

    const int cap = run_.step_cap();
    for (int step = 0; step < cap; ++step) {
      HopRecord rec = hop(step);
      log.total_reward += rec.reward;
      const int next = rec.next_cell;
      log.hops.push_back(rec);
      if (next < 0) {
        log.outcome = Outcome::Violated;
        break;
      }
      if (const auto end = terminal(next)) {
        log.outcome = *end;
        break;
      }
      if ((step + 1) % run_.batch == 0 && step + 1 < cap) {
        gps_ = fit_residual_gps(residuals_from_log(data_), run_.inducing, run_.kernel,
                                derive_seed(seed_, 2));
        const PolicyMode before = mode_;
        synthesize(true);
        log.batches.push_back(batch_record(step + 1));
        if (before == PolicyMode::Exploration && mode_ == PolicyMode::GoalReaching) {
          log.switch_step = step + 1;
          log.batches.back().switched = true;
        }
      }
    }
    log.steps = static_cast<int>(log.hops.size());
    return log;
  }

 private:
  std::optional<Outcome> terminal(int q) const {
    if (part_.label(q) >> hazard_ & 1u) return Outcome::Violated;
    if (part_.label(q) >> goal_ & 1u) return Outcome::Satisfied;
    if (s_ < 0) return Outcome::Violated;
    return std::nullopt;
  }

  int product_state() const { return q_ * dra_.state_count + s_; }

  const std::vector<double>& believed_reward() const {
    return run_.reward_mode == RewardMode::Known ? truth_ : knowledge_->reward;
  }

  void synthesize(bool check_switch) {
    IntervalSettings is;
    is.z_score = run_.z_score;
    is.control_error = ctrl_err_;
    is.out_of_bounds_labels = {env_.hazard};
    Imdp imdp = estimate_intervals(part_, gps_, noise_, is);
    imdp.initial = {q_};
    std::vector<double> w(static_cast<std::size_t>(imdp.mdp.size()), 0.0);
    std::copy(believed_reward().begin(), believed_reward().end(), w.begin());

    auto syn = std::make_unique<Synthesis>();
    syn->pm = product(imdp, dra_, std::move(w));
    MtPimdp& pm = syn->pm;
    const int p = product_state();
    pm.initial = {p};

    const std::vector<bool> acc = accepting_mec_states(pm);
    const ValueResult worst = interval_value_iteration(pm.mdp, acc, Adversary::Worst);
    syn->p_lower = worst.value[p];

    std::optional<Restriction> nonviolating;
    try {
      nonviolating = prune_nonviolating(pm);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InitialStateViolating) throw;
    }

    if (mode_ == PolicyMode::Exploration && check_switch && nonviolating) {
      try {
        const std::vector<int> required = {p};
        (void)prune_satisfying(pm, worst.value, run_.p_sat, nonviolating->actions, required);
        mode_ = PolicyMode::GoalReaching;
        m_ = 0;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SatisfactionUnreachable) throw;
      }
    }

    if (!nonviolating) {
      syn->recovery = true;
      syn->eligible = full_action_map(pm.mdp);
      syn->ltl = worst.action;
    } else if (mode_ == PolicyMode::GoalReaching) {
      try {
        const std::vector<int> required = {p};
        Restriction sat = prune_satisfying(pm, worst.value, run_.p_sat, nonviolating->actions, required);
        syn->eligible = std::move(sat.actions);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SatisfactionUnreachable) throw;
        syn->eligible = nonviolating->actions;
      }
      syn->ltl = interval_value_iteration(pm.mdp, acc, Adversary::Worst, &syn->eligible).action;
    } else {
      syn->eligible = nonviolating->actions;
      std::vector<bool> alive(nonviolating->removed.size());
      for (std::size_t i = 0; i < alive.size(); ++i) alive[i] = !nonviolating->removed[i];
      const std::vector<Mec> mecs = compute_mecs(pm.mdp, &syn->eligible, &alive);
      if (mecs.empty()) {
        syn->ltl = interval_value_iteration(pm.mdp, acc, Adversary::Worst, &syn->eligible).action;
      } else {
        syn->ltl = select_optimal_mec(mecs, pm, p, syn->eligible).actions;
      }
    }

    const QTable* q = nullptr;
    if (run_.reward_mode == RewardMode::Known) {
      syn->offline_q = q_learn_offline(pm, syn->eligible, run_.q, Adversary::Worst);
      q = &syn->offline_q;
    } else {
      q = &knowledge_->q;
    }
    const bool online = run_.reward_mode == RewardMode::Unknown;
    const std::uint64_t policy_seed = derive_seed(seed_, 100 + synth_count_++);
    if (mode_ == PolicyMode::GoalReaching) {
      syn->policy = SwitchingPolicy::goal_reaching(syn->eligible, syn->ltl, q, run_.c, run_.eps, policy_seed, online,
                                                   m_);
    } else {
      syn->policy = SwitchingPolicy::exploration(syn->eligible, syn->ltl, q, run_.p_rl_ee, policy_seed, online);
    }
    syn_ = std::move(syn);
  }

  BatchRecord batch_record(int step) const {
    BatchRecord b;
    b.step = step;
    b.samples = static_cast<int>(data_.size());
    b.mode = mode_;
    b.recovery = syn_->recovery;
    b.p_lower = syn_->p_lower;
    const auto n = static_cast<std::size_t>(part_.size());
    b.mean_x.resize(n), b.mean_y.resize(n), b.std_x.resize(n), b.std_y.resize(n);
    for (int q = 0; q < part_.size(); ++q) {
      const GpPrediction px = gps_.x.predict(part_.center(q));
      const GpPrediction py = gps_.y.predict(part_.center(q));
      b.mean_x[q] = px.mean;
      b.mean_y[q] = py.mean;
      b.std_x[q] = std::sqrt(px.variance);
      b.std_y[q] = std::sqrt(py.variance);
    }
    return b;
  }

  HopRecord hop(int step) {
    const int p = product_state();
    PolicyDecision d;
    try {
      d = syn_->policy->next(p);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoEligibleAction) throw;
      synthesize(false);
      d = syn_->policy->next(p);
    }
    if (mode_ == PolicyMode::GoalReaching) ++m_;

    HopRecord rec;
    rec.hop = step;
    rec.start = state_.position;
    rec.cell = q_;
    rec.product_state = p;
    rec.requested_action = d.action;
    rec.branch = d.branch;
    rec.mode = mode_;

    const auto command = [&](int action, Vec2& disp, Vec3& vdes) {
      const int target = *action_target(part_, q_, action);
      disp = part_.center(target) - state_.position;
      vdes = runner_.gait().velocity_towards(action_heading(action));
    };
    Vec2 disp;
    Vec3 vdes;
    command(d.action, disp, vdes);
    AngleSolution sol = solve_leg_angles(runner_.model(), state_.velocity, disp, vdes, run_.weights);
    int action = d.action;
    if ((sol.prediction.displacement - disp).norm() > run_.backup_threshold * part_.cell_size()) {
      std::vector<int> actions;
      std::vector<BackupCandidate> candidates;
      const ActionMask mask = syn_->eligible[p];
      for (int a = 0; a < kHopActionCount; ++a) {
        if (!mask_has(mask, a)) continue;
        BackupCandidate c;
        command(a, c.target_displacement, c.desired_velocity);
        actions.push_back(a);
        candidates.push_back(c);
      }
      const BackupChoice choice = select_backup(runner_.model(), state_.velocity, candidates, run_.weights);
      if (actions[choice.index] != action) {
        action = actions[choice.index];
        sol = choice.solution;
        rec.backup = true;
      }
    }
    rec.action = action;
    rec.placement = sol.placement;
    rec.cost = sol.cost;
    rec.predicted = sol.prediction.displacement;

    const InterstitialState next =
        step_hop(state_, sol.placement, runner_.params(), &field_, &noise_rng_);
    rec.end = next.position;
    rec.realized = next.position - state_.position;
    data_.push_back({state_.position, rec.predicted, rec.realized});

    const std::optional<int> landed = part_.locate(next.position);
    rec.next_cell = landed ? *landed : -1;
    rec.reward = landed ? truth_[*landed] : 0.0;

    const int s_next = dra_.next(s_, obs_[q_]);
    if (run_.reward_mode == RewardMode::Unknown) {
      if (landed) knowledge_->reward[*landed] = rec.reward;
      const int sink = part_.size();
      const int next_cell = landed ? *landed : sink;
      const int p_next = next_cell * dra_.state_count + std::max(s_next, 0);
      ActionMask next_mask = 0;
      if (landed && p_next < static_cast<int>(syn_->eligible.size())) next_mask = syn_->eligible[p_next];
      knowledge_->q.update(p, action, rec.reward, p_next, next_mask);
    }

    state_ = next;
    if (landed) q_ = *landed;
    s_ = s_next;
    return rec;
  }

  const Runner& runner_;
  const EnvironmentConfig& env_;
  const RunConfig& run_;
  LearnedReward* knowledge_;
  LearnedReward local_;
  Partition part_;
  Dra dra_;
  std::vector<double> truth_;
  PerturbationField field_;
  NoiseModel noise_;
  std::uint64_t seed_;
  Rng noise_rng_;
  std::vector<Observation> obs_;
  double ctrl_err_ = 0.0;
  int goal_ = -1, hazard_ = -1;

  InterstitialState state_;
  int q_ = 0, s_ = 0;
  GpPair gps_;
  std::vector<HopObservation> data_;
  PolicyMode mode_ = PolicyMode::Exploration;
  int m_ = 0;
  std::uint64_t synth_count_ = 0;
  std::unique_ptr<Synthesis> syn_;
};

}  // namespace

Runner::Runner(HopModel model, const SlipParams& params, double speed)
    : model_(std::move(model)), params_(params), gait_(find_steady_gait(params, speed, 1.0)) {}

Runner::Runner(HopModel model, const SlipParams& params, const SteadyGait& gait)
    : model_(std::move(model)), params_(params), gait_(gait) {}

RunLog Runner::run_episode(const EnvironmentConfig& env, const RunConfig& run, LearnedReward* knowledge) const {
  run.validate();
  env.validate();
  Episode episode(*this, env, run, knowledge);
  return episode.run();
}

std::vector<RunLog> Runner::run_experiment(const EnvironmentConfig& env, const RunConfig& run) const {
  run.validate();
  std::vector<RunLog> logs;
  LearnedReward knowledge;
  for (int r = 0; r < run.runs; ++r) {
    RunConfig cfg = run;
    cfg.run_index = run.run_index + r;
    logs.push_back(run_episode(env, cfg, run.reward_mode == RewardMode::Unknown ? &knowledge : nullptr));
  }
  return logs;
}

SweepResult Runner::sweep_switching(const EnvironmentConfig& env, const RunConfig& base, std::vector<double> p_values,
                                    std::vector<double> eps_values, int runs) const {
  if (runs < 1) config_error("sweep needs at least one run per cell");
  SweepResult out;
  out.p_values = std::move(p_values);
  out.eps_values = std::move(eps_values);
  for (double p : out.p_values) {
    for (double e : out.eps_values) {
      RunConfig cfg = base;
      cfg.p_rl_ee = p;
      cfg.c = p;
      cfg.eps = e;
      cfg.runs = runs;
      const std::vector<RunLog> logs = run_experiment(env, cfg);
      SweepCell cell;
      cell.p = p;
      cell.eps = e;
      cell.runs = runs;
      double reward = 0.0, steps = 0.0;
      for (const auto& log : logs) {
        if (!log.satisfied()) continue;
        ++cell.completed;
        reward += log.total_reward;
        steps += log.steps;
      }
      const double nan = std::numeric_limits<double>::quiet_NaN();
      cell.mean_reward = cell.completed ? reward / cell.completed : nan;
      cell.mean_steps = cell.completed ? steps / cell.completed : nan;
      out.cells.push_back(cell);
    }
  }
  return out;
}

}  // namespace hopnav
