#include "hopnav/synthesis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "hopnav/error.hpp"

namespace hopnav {

ActionMap full_action_map(const IntervalMdp& mdp) {
  ActionMap map(static_cast<std::size_t>(mdp.size()), 0);
  for (int s = 0; s < mdp.size(); ++s) {
    for (const Choice& c : mdp.choices[s]) map[s] |= ActionMask{1} << c.action;
  }
  return map;
}

std::vector<double> resolve_adversary(const Choice& choice, std::span<const double> values, Adversary mode) {
  const std::size_t k = choice.edges.size();
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double va = values[choice.edges[a].target];
    const double vb = values[choice.edges[b].target];
    return mode == Adversary::Worst ? va < vb : va > vb;
  });
  std::vector<double> p(k);
  double remaining = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    p[i] = choice.edges[i].lower;
    remaining -= p[i];
  }
  for (std::size_t i : order) {
    if (remaining <= 0.0) break;
    const double add = std::min(choice.edges[i].upper - choice.edges[i].lower, remaining);
    p[i] += add;
    remaining -= add;
  }
  return p;
}

namespace {

ActionMask allowed_mask(const IntervalMdp& mdp, const ActionMap* allowed, int s) {
  ActionMask m = 0;
  for (const Choice& c : mdp.choices[s]) m |= ActionMask{1} << c.action;
  return allowed ? (m & (*allowed)[s]) : m;
}

double expectation(const Choice& c, std::span<const double> values, Adversary mode) {
  const std::vector<double> p = resolve_adversary(c, values, mode);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += p[i] * values[c.edges[i].target];
  return sum;
}

// Iterative Tarjan over the sub-graph of alive states using masked actions.
std::vector<int> strongly_connected(const IntervalMdp& mdp, const std::vector<bool>& alive, const ActionMap& mask) {
  const int n = mdp.size();
  std::vector<int> comp(static_cast<std::size_t>(n), -1), index(static_cast<std::size_t>(n), -1),
      low(static_cast<std::size_t>(n), 0);
  std::vector<int> stack;
  std::vector<bool> on_stack(static_cast<std::size_t>(n), false);
  int counter = 0, comps = 0;

  std::vector<std::vector<int>> succ(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    if (!alive[s]) continue;
    for (const Choice& c : mdp.choices[s]) {
      if (!mask_has(mask[s], c.action)) continue;
      for (const IntervalEdge& e : c.edges) {
        if (e.upper > 0.0 && alive[e.target]) succ[s].push_back(e.target);
      }
    }
    std::sort(succ[s].begin(), succ[s].end());
    succ[s].erase(std::unique(succ[s].begin(), succ[s].end()), succ[s].end());
  }

  struct Frame {
    int state;
    std::size_t next;
  };
  for (int root = 0; root < n; ++root) {
    if (!alive[root] || index[root] >= 0) continue;
    std::vector<Frame> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame& f = call.back();
      if (f.next < succ[f.state].size()) {
        const int t = succ[f.state][f.next++];
        if (index[t] < 0) {
          index[t] = low[t] = counter++;
          stack.push_back(t);
          on_stack[t] = true;
          call.push_back({t, 0});
        } else if (on_stack[t]) {
          low[f.state] = std::min(low[f.state], index[t]);
        }
        continue;
      }
      const int v = f.state;
      if (low[v] == index[v]) {
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = comps;
        } while (w != v);
        ++comps;
      }
      call.pop_back();
      if (!call.empty()) low[call.back().state] = std::min(low[call.back().state], low[v]);
    }
  }
  return comp;
}

// Shrinks `alive` and `mask` to the largest sub-structure in which every
// state keeps an action with all successors alive and can reach `goal`.
void prune_to_fixed_point(const IntervalMdp& mdp, const std::vector<bool>& goal, std::vector<bool>& alive,
                          ActionMap& mask) {
  const int n = mdp.size();
  for (bool changed = true; changed;) {
    changed = false;
    for (int s = 0; s < n; ++s) {
      if (!alive[s]) continue;
      for (const Choice& c : mdp.choices[s]) {
        if (!mask_has(mask[s], c.action)) continue;
        const bool leaves = std::any_of(c.edges.begin(), c.edges.end(),
                                        [&](const IntervalEdge& e) { return e.upper > 0.0 && !alive[e.target]; });
        if (leaves) mask[s] &= ~(ActionMask{1} << c.action);
      }
      if (mask[s] == 0) {
        alive[s] = false;
        changed = true;
      }
    }

    // Backward reachability of goal states through surviving actions.
    std::vector<bool> reaches(static_cast<std::size_t>(n), false);
    for (int s = 0; s < n; ++s) reaches[s] = alive[s] && goal[s];
    for (bool grew = true; grew;) {
      grew = false;
      for (int s = 0; s < n; ++s) {
        if (!alive[s] || reaches[s]) continue;
        for (const Choice& c : mdp.choices[s]) {
          if (!mask_has(mask[s], c.action)) continue;
          if (std::any_of(c.edges.begin(), c.edges.end(),
                          [&](const IntervalEdge& e) { return e.upper > 0.0 && reaches[e.target]; })) {
            reaches[s] = true;
            grew = true;
            break;
          }
        }
      }
    }
    for (int s = 0; s < n; ++s) {
      if (alive[s] && !reaches[s]) {
        alive[s] = false;
        changed = true;
      }
    }
  }
  for (int s = 0; s < n; ++s) {
    if (!alive[s]) mask[s] = 0;
  }
}

}  // namespace

namespace {

constexpr double kMassEps = 1e-12;

// Mass the choice is certain (Worst) or able (Best) to put on `hit` while
// every possible successor stays inside `stay`; negative when it can leave.
double progress_mass(const Choice& c, const std::vector<bool>& stay, const std::vector<bool>& hit, Adversary mode) {
  if (mode == Adversary::Worst) {
    double lower_hit = 0.0, upper_miss = 0.0;
    for (const IntervalEdge& e : c.edges) {
      if (e.upper > 0.0 && !stay[e.target]) return -1.0;
      if (hit[e.target]) lower_hit += e.lower;
      else upper_miss += e.upper;
    }
    return std::max(lower_hit, 1.0 - upper_miss);
  }
  double upper_in = 0.0, upper_hit = 0.0, lower_in_miss = 0.0;
  for (const IntervalEdge& e : c.edges) {
    if (!stay[e.target]) {
      if (e.lower > 0.0) return -1.0;
      continue;
    }
    upper_in += e.upper;
    if (hit[e.target]) upper_hit += e.upper;
    else lower_in_miss += e.lower;
  }
  if (upper_in < 1.0 - kMassEps) return -1.0;
  return std::min(upper_hit, 1.0 - lower_in_miss);
}

}  // namespace

std::vector<bool> almost_sure_states(const IntervalMdp& mdp, const std::vector<bool>& target, Adversary mode,
                                     const ActionMap* allowed, std::vector<int>* actions) {
  const int n = mdp.size();
  if (static_cast<int>(target.size()) != n) throw Error(ErrorCode::InvalidArgument, "target size mismatch");
  std::vector<bool> x(static_cast<std::size_t>(n), true);
  std::vector<int> act(static_cast<std::size_t>(n), -1);
  for (;;) {
    // Attractor of the target inside x.
    std::vector<bool> y = target;
    std::fill(act.begin(), act.end(), -1);
    for (bool grew = true; grew;) {
      grew = false;
      std::vector<bool> y_next = y;
      for (int s = 0; s < n; ++s) {
        if (y[s] || !x[s]) continue;
        const ActionMask m = allowed_mask(mdp, allowed, s);
        double best = kMassEps;
        for (const Choice& c : mdp.choices[s]) {
          if (!mask_has(m, c.action)) continue;
          const double mass = progress_mass(c, x, y, mode);
          if (mass > best) {
            best = mass;
            act[s] = c.action;
          }
        }
        if (act[s] >= 0) {
          y_next[s] = true;
          grew = true;
        }
      }
      y.swap(y_next);
    }
    if (y == x) break;
    x = y;
  }
  if (actions) *actions = std::move(act);
  return x;
}

ValueResult interval_value_iteration(const IntervalMdp& mdp, const std::vector<bool>& target, Adversary mode,
                                     const ActionMap* allowed, const ValueSettings& settings) {
  const int n = mdp.size();
  if (static_cast<int>(target.size()) != n) throw Error(ErrorCode::InvalidArgument, "target size mismatch");
  ValueResult r;
  r.value.assign(static_cast<std::size_t>(n), 0.0);
  r.action.assign(static_cast<std::size_t>(n), -1);
  // States that reach the target with probability one are fixed up front;
  // iterating toward them can take arbitrarily many sweeps.
  std::vector<int> sure_action;
  const std::vector<bool> sure = almost_sure_states(mdp, target, mode, allowed, &sure_action);
  for (int s = 0; s < n; ++s) {
    r.value[s] = sure[s] ? 1.0 : 0.0;
    if (sure[s] && !target[s]) r.action[s] = sure_action[s];
  }

  std::vector<double> next = r.value;
  for (r.sweeps = 1; r.sweeps <= settings.max_sweeps; ++r.sweeps) {
    double residual = 0.0;
    for (int s = 0; s < n; ++s) {
      if (sure[s]) continue;
      const ActionMask m = allowed_mask(mdp, allowed, s);
      double best = 0.0;
      int best_a = -1;
      for (const Choice& c : mdp.choices[s]) {
        if (!mask_has(m, c.action)) continue;
        const double v = expectation(c, r.value, mode);
        if (best_a < 0 || v > best) {
          best = v;
          best_a = c.action;
        }
      }
      next[s] = best;
      // Only switch action on a strict value gain so that ties cannot trap
      // the policy in a cycle that never reaches the target.
      if (best_a >= 0 && (r.action[s] < 0 ? best > 0.0 : best > r.value[s])) r.action[s] = best_a;
      residual = std::max(residual, std::abs(next[s] - r.value[s]));
    }
    r.value.swap(next);
    if (residual < settings.tolerance) break;
  }
  if (r.sweeps > settings.max_sweeps) throw Error(ErrorCode::NonConvergence, "value iteration hit the sweep cap");
  for (int s = 0; s < n; ++s) {
    if (target[s] || r.action[s] >= 0) continue;
    const ActionMask m = allowed_mask(mdp, allowed, s);
    if (m != 0) r.action[s] = std::countr_zero(m);
  }
  return r;
}

ValueBounds satisfaction_bounds(const IntervalMdp& mdp, const std::vector<bool>& target, const ActionMap* allowed,
                                const ValueSettings& settings) {
  ValueResult lo = interval_value_iteration(mdp, target, Adversary::Worst, allowed, settings);
  ValueResult hi = interval_value_iteration(mdp, target, Adversary::Best, allowed, settings);
  return {std::move(lo.value), std::move(hi.value), std::move(lo.action)};
}

std::vector<Mec> compute_mecs(const IntervalMdp& mdp, const ActionMap* allowed, const std::vector<bool>* states) {
  const int n = mdp.size();
  std::vector<bool> alive(static_cast<std::size_t>(n), true);
  ActionMap mask(static_cast<std::size_t>(n), 0);
  for (int s = 0; s < n; ++s) {
    if (states) alive[s] = (*states)[s];
    mask[s] = allowed_mask(mdp, allowed, s);
  }

  std::vector<int> comp;
  for (bool changed = true; changed;) {
    changed = false;
    comp = strongly_connected(mdp, alive, mask);
    for (int s = 0; s < n; ++s) {
      if (!alive[s]) continue;
      for (const Choice& c : mdp.choices[s]) {
        if (!mask_has(mask[s], c.action)) continue;
        const bool leaves = std::any_of(c.edges.begin(), c.edges.end(), [&](const IntervalEdge& e) {
          return e.upper > 0.0 && (!alive[e.target] || comp[e.target] != comp[s]);
        });
        if (leaves) {
          mask[s] &= ~(ActionMask{1} << c.action);
          changed = true;
        }
      }
      if (mask[s] == 0) {
        alive[s] = false;
        changed = true;
      }
    }
  }

  std::vector<Mec> mecs;
  std::vector<int> slot(static_cast<std::size_t>(n) + 1, -1);
  for (int s = 0; s < n; ++s) {
    if (!alive[s]) continue;
    int& k = slot[comp[s]];
    if (k < 0) {
      k = static_cast<int>(mecs.size());
      mecs.emplace_back();
    }
    mecs[k].states.push_back(s);
    mecs[k].actions.push_back(mask[s]);
  }
  return mecs;
}

std::vector<bool> accepting_mec_states(const MtPimdp& pm, const ActionMap* allowed) {
  const int n = pm.size();
  std::vector<bool> accepting(static_cast<std::size_t>(n), false);
  for (const RabinPair& pair : pm.pairs) {
    const auto in = [](const std::vector<int>& set, int s) { return std::find(set.begin(), set.end(), s) != set.end(); };
    std::vector<bool> keep(static_cast<std::size_t>(n));
    for (int p = 0; p < n; ++p) keep[p] = !in(pair.bad, pm.dra_state(p));
    for (const Mec& mec : compute_mecs(pm.mdp, allowed, &keep)) {
      const bool good = std::any_of(mec.states.begin(), mec.states.end(),
                                    [&](int p) { return in(pair.good, pm.dra_state(p)); });
      if (!good) continue;
      for (int p : mec.states) accepting[p] = true;
    }
  }
  return accepting;
}

std::vector<bool> failure_states(const MtPimdp& pm) {
  const int n = pm.size();
  const std::vector<bool> acc = accepting_mec_states(pm);
  std::vector<bool> reaches = acc;
  for (bool grew = true; grew;) {
    grew = false;
    for (int s = 0; s < n; ++s) {
      if (reaches[s]) continue;
      for (const Choice& c : pm.mdp.choices[s]) {
        if (std::any_of(c.edges.begin(), c.edges.end(),
                        [&](const IntervalEdge& e) { return e.upper > 0.0 && reaches[e.target]; })) {
          reaches[s] = true;
          grew = true;
          break;
        }
      }
    }
  }
  reaches.flip();
  return reaches;
}

Restriction prune_nonviolating(const MtPimdp& pm) {
  const int n = pm.size();
  Restriction r;
  r.actions = full_action_map(pm.mdp);
  std::vector<bool> alive(static_cast<std::size_t>(n), true);
  prune_to_fixed_point(pm.mdp, accepting_mec_states(pm), alive, r.actions);
  r.removed = alive;
  r.removed.flip();
  if (!pm.initial.empty() &&
      std::all_of(pm.initial.begin(), pm.initial.end(), [&](int s) { return r.removed[s]; })) {
    throw Error(ErrorCode::InitialStateViolating, "every initial state is a failure state");
  }
  return r;
}

Restriction prune_satisfying(const MtPimdp& pm, std::span<const double> lower_values, double p_sat,
                             const ActionMap& base, std::span<const int> required) {
  const int n = pm.size();
  if (!(p_sat >= 0.0 && p_sat < 1.0)) throw Error(ErrorCode::InvalidArgument, "P_sat must lie in [0, 1)");
  if (static_cast<int>(lower_values.size()) != n || static_cast<int>(base.size()) != n) {
    throw Error(ErrorCode::InvalidArgument, "value/action map size mismatch");
  }
  Restriction r;
  r.actions = base;
  std::vector<bool> alive(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) alive[s] = lower_values[s] > p_sat && base[s] != 0;
  prune_to_fixed_point(pm.mdp, accepting_mec_states(pm), alive, r.actions);
  r.removed = alive;
  r.removed.flip();
  for (int s : required) {
    if (r.removed[s]) throw Error(ErrorCode::SatisfactionUnreachable, "state does not meet the satisfaction threshold");
  }
  return r;
}

MecSelection select_optimal_mec(std::span<const Mec> mecs, const MtPimdp& pm, int initial, const ActionMap& allowed,
                                const ValueSettings& settings) {
  if (mecs.empty()) throw Error(ErrorCode::InvalidArgument, "no end components to choose from");
  const int n = pm.size();
  std::vector<double> prob(mecs.size()), avg(mecs.size());
  std::vector<std::vector<int>> acts(mecs.size());
  for (std::size_t i = 0; i < mecs.size(); ++i) {
    std::vector<bool> target(static_cast<std::size_t>(n), false);
    double sum = 0.0;
    for (int s : mecs[i].states) {
      target[s] = true;
      sum += pm.reward_of(s);
    }
    avg[i] = sum / static_cast<double>(mecs[i].states.size());
    ValueResult v = interval_value_iteration(pm.mdp, target, Adversary::Worst, &allowed, settings);
    prob[i] = v.value[initial];
    for (std::size_t k = 0; k < mecs[i].states.size(); ++k) {
      v.action[mecs[i].states[k]] = std::countr_zero(mecs[i].actions[k]);
    }
    acts[i] = std::move(v.action);
  }

  constexpr double kSure = 1.0 - 1e-4;
  const bool any_sure = std::any_of(prob.begin(), prob.end(), [](double p) { return p >= kSure; });
  std::size_t best = mecs.size();
  for (std::size_t i = 0; i < mecs.size(); ++i) {
    if (best == mecs.size()) {
      if (!any_sure || prob[i] >= kSure) best = i;
      continue;
    }
    if (!any_sure) {
      if (prob[i] > prob[best]) best = i;
    } else if (prob[i] >= kSure &&
               (avg[i] > avg[best] || (avg[i] == avg[best] && mecs[i].states < mecs[best].states))) {
      best = i;
    }
  }
  return {best, prob[best], avg[best], std::move(acts[best])};
}

QTable::QTable(int states, const QParams& params)
    : states_(states),
      params_(params),
      q_(static_cast<std::size_t>(states) * kActionCount, 0.0),
      visits_(static_cast<std::size_t>(states) * kActionCount, 0) {}

double QTable::value(int s, ActionMask allowed) const {
  const int a = greedy(s, allowed);
  return a < 0 ? 0.0 : at(s, a);
}

int QTable::greedy(int s, ActionMask allowed) const {
  int best = -1;
  for (int a = 0; a < kActionCount; ++a) {
    if (mask_has(allowed, a) && (best < 0 || at(s, a) > at(s, best))) best = a;
  }
  return best;
}

void QTable::update(int s, int a, double reward, int next, ActionMask next_allowed) {
  const std::size_t i = index(s, a);
  ++visits_[i];
  const double rate = params_.learning_rate / std::sqrt(static_cast<double>(visits_[i]));
  q_[i] += rate * (reward + params_.gamma * value(next, next_allowed) - q_[i]);
}

QTable q_learn_offline(const MtPimdp& pm, const ActionMap& allowed, const QParams& params, Adversary mode) {
  const int n = pm.size();
  QTable table(n, params);
  std::vector<double> entry(static_cast<std::size_t>(n));
  std::vector<double> next_q(static_cast<std::size_t>(n) * kActionCount, 0.0);
  int sweep = 0;
  for (; sweep < params.max_sweeps; ++sweep) {
    for (int s = 0; s < n; ++s) entry[s] = pm.reward_of(s) + params.gamma * table.value(s, allowed[s]);
    double residual = 0.0;
    for (int s = 0; s < n; ++s) {
      for (const Choice& c : pm.mdp.choices[s]) {
        if (!mask_has(allowed[s], c.action)) continue;
        const double v = expectation(c, entry, mode);
        residual = std::max(residual, std::abs(v - table.at(s, c.action)));
        next_q[static_cast<std::size_t>(s) * kActionCount + c.action] = v;
      }
    }
    for (int s = 0; s < n; ++s) {
      for (const Choice& c : pm.mdp.choices[s]) {
        if (mask_has(allowed[s], c.action)) table.at(s, c.action) = next_q[static_cast<std::size_t>(s) * kActionCount + c.action];
      }
    }
    if (residual < params.tolerance) break;
  }
  if (sweep >= params.max_sweeps) throw Error(ErrorCode::NonConvergence, "Q iteration hit the sweep cap");
  return table;
}

SwitchingPolicy SwitchingPolicy::exploration(ActionMap eligible, std::vector<int> ltl_actions, const QTable* q,
                                             double p_rl, std::uint64_t seed, bool epsilon_greedy) {
  if (!(p_rl >= 0.0 && p_rl <= 1.0)) throw Error(ErrorCode::InvalidArgument, "P_RL,ee must lie in [0, 1]");
  SwitchingPolicy p;
  p.mode_ = PolicyMode::Exploration;
  p.eligible_ = std::move(eligible);
  p.ltl_ = std::move(ltl_actions);
  p.q_ = q;
  p.p_rl_ = p_rl;
  p.epsilon_greedy_ = epsilon_greedy;
  p.rng_ = Rng(seed);
  return p;
}

SwitchingPolicy SwitchingPolicy::goal_reaching(ActionMap eligible, std::vector<int> ltl_actions, const QTable* q,
                                               double c, double eps, std::uint64_t seed, bool epsilon_greedy,
                                               int start_step) {
  if (!(c >= 0.0 && c < 1.0)) throw Error(ErrorCode::InvalidArgument, "C must lie in [0, 1)");
  if (!(eps >= 0.0 && eps <= 1.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must lie in [0, 1]");
  SwitchingPolicy p;
  p.mode_ = PolicyMode::GoalReaching;
  p.eligible_ = std::move(eligible);
  p.ltl_ = std::move(ltl_actions);
  p.q_ = q;
  p.c_ = c;
  p.eps_ = eps;
  p.epsilon_greedy_ = epsilon_greedy;
  p.m_ = std::max(0, start_step);
  p.rng_ = Rng(seed);
  return p;
}

double SwitchingPolicy::rl_probability() const {
  return mode_ == PolicyMode::Exploration ? p_rl_ : c_ * std::exp(-eps_ * m_);
}

PolicyDecision SwitchingPolicy::next(int state) {
  if (state < 0 || state >= static_cast<int>(eligible_.size())) {
    throw Error(ErrorCode::InvalidArgument, "state outside the policy domain");
  }
  const ActionMask mask = eligible_[state];
  if (mask == 0) throw Error(ErrorCode::NoEligibleAction, "no eligible action at state " + std::to_string(state));

  const auto rl_action = [&]() -> int {
    if (!q_) return -1;
    if (epsilon_greedy_ && rng_.bernoulli(q_->params().exploration)) {
      const int pick = static_cast<int>(rng_.index(static_cast<std::uint64_t>(std::popcount(mask))));
      ActionMask m = mask;
      for (int i = 0; i < pick; ++i) m &= m - 1;
      return std::countr_zero(m);
    }
    return q_->greedy(state, mask);
  };
  const int ltl = state < static_cast<int>(ltl_.size()) && ltl_[state] >= 0 && mask_has(mask, ltl_[state])
                      ? ltl_[state]
                      : -1;

  PolicyDecision d;
  d.rl_probability = rl_probability();
  if (rng_.bernoulli(d.rl_probability)) {
    d.action = rl_action();
    d.branch = Branch::Rl;
    if (d.action < 0) {
      d.action = ltl;
      d.branch = Branch::Ltl;
    }
  } else {
    d.action = ltl;
    d.branch = Branch::Ltl;
    if (d.action < 0) {
      d.action = rl_action();
      d.branch = Branch::Rl;
    }
  }
  if (d.action < 0) throw Error(ErrorCode::NoEligibleAction, "neither branch has an eligible action");
  if (mode_ == PolicyMode::GoalReaching) ++m_;
  return d;
}

double tradeoff_progress(double c, double eps, double m_switch, double m) {
  return (m - m_switch) + (2.0 * c / eps) * (std::exp(-eps * m) - std::exp(-eps * m_switch));
}

TradeoffBounds tradeoff_bounds(double c, double eps, double product_size) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
  if (!(c > 0.0 && c < 1.0)) throw Error(ErrorCode::InvalidArgument, "C must lie in (0, 1)");
  if (!(product_size >= 0.0)) throw Error(ErrorCode::InvalidArgument, "product size must be non-negative");
  TradeoffBounds b;
  b.m_switch = c > 0.5 ? -std::log(0.5 / c) / eps : 0.0;
  double lo = b.m_switch;
  double hi = b.m_switch + product_size + 2.0 * c / eps + 1.0;
  while (hi - lo > 1e-14 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (tradeoff_progress(c, eps, b.m_switch, mid) > product_size) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  b.m_ltl = hi;
  b.rl_proportion = c / (b.m_ltl * eps) * (1.0 - std::exp(-eps * b.m_ltl));
  return b;
}

}  // namespace hopnav
