#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hopnav/automata.hpp"
#include "hopnav/rng.hpp"

namespace hopnav {

/// Bit a set means action a is allowed.
using ActionMask = std::uint32_t;
using ActionMap = std::vector<ActionMask>;

inline bool mask_has(ActionMask m, int a) { return (m >> a) & 1u; }

ActionMap full_action_map(const IntervalMdp& mdp);

enum class Adversary { Worst, Best };

/// Concrete successor distribution chosen by the adversary: every edge starts
/// at its lower bound, then the remaining mass goes to successors in value
/// order (ascending for Worst, descending for Best) up to their upper bounds.
std::vector<double> resolve_adversary(const Choice& choice, std::span<const double> values, Adversary mode);

struct ValueSettings {
  double tolerance = 1e-9;  // sup-norm sweep residual
  int max_sweeps = 100000;
};

struct ValueResult {
  std::vector<double> value;
  std::vector<int> action;  // maximizing action per state, -1 if none
  int sweeps = 0;
};

/// States from which some policy reaches `target` with probability one under
/// every (Worst) or some (Best) resolution of the intervals. `actions`
/// receives, per non-target state of the set, the action with the largest
/// progress mass into the previous attractor layer.
std::vector<bool> almost_sure_states(const IntervalMdp& mdp, const std::vector<bool>& target, Adversary mode,
                                     const ActionMap* allowed = nullptr, std::vector<int>* actions = nullptr);

/// Max-reachability of `target` under the given adversary (Jacobi sweeps
/// after fixing the almost-sure states to one).
ValueResult interval_value_iteration(const IntervalMdp& mdp, const std::vector<bool>& target, Adversary mode,
                                     const ActionMap* allowed = nullptr, const ValueSettings& settings = {});

struct ValueBounds {
  std::vector<double> lower;  // worst-case satisfaction probability
  std::vector<double> upper;  // best-case
  std::vector<int> action;    // maximizing action under the worst-case adversary
};

ValueBounds satisfaction_bounds(const IntervalMdp& mdp, const std::vector<bool>& target,
                                const ActionMap* allowed = nullptr, const ValueSettings& settings = {});

struct Mec {
  std::vector<int> states;          // ascending
  std::vector<ActionMask> actions;  // parallel to states

  bool operator==(const Mec&) const = default;
};

/// Maximal end components on the positive-upper-bound graph, optionally
/// restricted to an action map and a state subset. Sorted by first state.
std::vector<Mec> compute_mecs(const IntervalMdp& mdp, const ActionMap* allowed = nullptr,
                              const std::vector<bool>* states = nullptr);

/// Union over Rabin pairs (G, B) of end-component states avoiding B that
/// contain a G state.
std::vector<bool> accepting_mec_states(const MtPimdp& pm, const ActionMap* allowed = nullptr);

/// States from which no accepting-MEC state is reachable on the
/// positive-upper-bound graph.
std::vector<bool> failure_states(const MtPimdp& pm);

struct Restriction {
  ActionMap actions;
  std::vector<bool> removed;  // failure (or unsatisfying) states
};

Restriction prune_nonviolating(const MtPimdp& pm);

/// Keeps states with worst-case satisfaction above p_sat and actions whose
/// successors all survive. Throws SatisfactionUnreachable if any of
/// `required` is dropped.
Restriction prune_satisfying(const MtPimdp& pm, std::span<const double> lower_values, double p_sat,
                             const ActionMap& base, std::span<const int> required);

struct MecSelection {
  std::size_t index = 0;
  double probability = 0.0;     // worst-case reach probability from the initial state
  double average_reward = 0.0;  // mean cell reward over the MEC
  std::vector<int> actions;     // per state: reach action outside the MEC, MEC action inside
};

MecSelection select_optimal_mec(std::span<const Mec> mecs, const MtPimdp& pm, int initial, const ActionMap& allowed,
                                const ValueSettings& settings = {});

struct QParams {
  double gamma = 0.95;
  double learning_rate = 0.1;  // decays as 1/sqrt(visits)
  double exploration = 0.1;    // epsilon-greedy rate for online selection
  double tolerance = 1e-6;
  int max_sweeps = 100000;
};

class QTable {
 public:
  QTable() = default;
  QTable(int states, const QParams& params = {});

  int size() const { return states_; }
  const QParams& params() const { return params_; }
  double at(int s, int a) const { return q_[index(s, a)]; }
  double& at(int s, int a) { return q_[index(s, a)]; }
  std::uint32_t visits(int s, int a) const { return visits_[index(s, a)]; }

  /// Max over allowed actions (0 if none).
  double value(int s, ActionMask allowed) const;
  /// Lowest-index argmax over allowed actions, -1 if none.
  int greedy(int s, ActionMask allowed) const;
  /// One temporal-difference update from a realized transition.
  void update(int s, int a, double reward, int next, ActionMask next_allowed);

 private:
  std::size_t index(int s, int a) const { return static_cast<std::size_t>(s) * kActionCount + a; }
  int states_ = 0;
  QParams params_;
  std::vector<double> q_;
  std::vector<std::uint32_t> visits_;
};

/// Offline Bellman sweeps with successor distributions resolved by the
/// adversary over r(s') + gamma * max Q(s'). Rewards are granted on entry.
QTable q_learn_offline(const MtPimdp& pm, const ActionMap& allowed, const QParams& params = {},
                       Adversary mode = Adversary::Worst);

enum class PolicyMode { Exploration, GoalReaching };
enum class Branch { Ltl, Rl };

struct PolicyDecision {
  int action = -1;
  Branch branch = Branch::Ltl;
  double rl_probability = 0.0;
};

class SwitchingPolicy {
 public:
  /// RL branch with fixed probability p_rl.
  static SwitchingPolicy exploration(ActionMap eligible, std::vector<int> ltl_actions, const QTable* q, double p_rl,
                                     std::uint64_t seed, bool epsilon_greedy = false);
  /// RL branch with probability c * exp(-eps * m), m = steps taken so far
  /// (starting from `start_step` when a policy is rebuilt mid-run).
  static SwitchingPolicy goal_reaching(ActionMap eligible, std::vector<int> ltl_actions, const QTable* q, double c,
                                       double eps, std::uint64_t seed, bool epsilon_greedy = false,
                                       int start_step = 0);

  PolicyMode mode() const { return mode_; }
  int steps() const { return m_; }
  double rl_probability() const;
  const ActionMap& eligible() const { return eligible_; }

  PolicyDecision next(int state);

 private:
  SwitchingPolicy() = default;
  PolicyMode mode_ = PolicyMode::Exploration;
  ActionMap eligible_;
  std::vector<int> ltl_;
  const QTable* q_ = nullptr;
  double p_rl_ = 0.0, c_ = 0.0, eps_ = 0.0;
  bool epsilon_greedy_ = false;
  int m_ = 0;
  Rng rng_;
};

struct TradeoffBounds {
  double m_switch = 0.0;
  double m_ltl = 0.0;
  double rl_proportion = 0.0;
};

/// Integral of (1 - 2c e^{-eps m}) over [m_switch, m] in closed form.
double tradeoff_progress(double c, double eps, double m_switch, double m);

TradeoffBounds tradeoff_bounds(double c, double eps, double product_size);

}  // namespace hopnav
