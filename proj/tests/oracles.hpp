#pragma once

// Brute-force reference implementations used to cross-check the library.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "hopnav/abstraction.hpp"
#include "hopnav/automata.hpp"
#include "hopnav/gp.hpp"
#include "hopnav/rng.hpp"
#include "hopnav/synthesis.hpp"

namespace hopnav::oracle {

// ----------------------------------------------------------------------- GP

// Dense GP posterior, solved directly.
struct ExactGp {
  std::vector<Vec2> x;
  Eigen::VectorXd alpha;
  Eigen::MatrixXd k_inv;
  KernelSettings k;

  ExactGp(std::vector<Vec2> inputs, const std::vector<double>& y, const KernelSettings& kernel)
      : x(std::move(inputs)), k(kernel) {
    const int n = static_cast<int>(x.size());
    Eigen::MatrixXd kk(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) kk(i, j) = cov(x[i], x[j]);
    kk.diagonal().array() += k.noise_sigma * k.noise_sigma;
    k_inv = kk.inverse();
    alpha = k_inv * Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  }
  double cov(const Vec2& a, const Vec2& b) const {
    return k.signal_sigma * k.signal_sigma * std::exp(-0.5 * (a - b).squaredNorm() / (k.lengthscale * k.lengthscale));
  }
  GpPrediction predict(const Vec2& p) const {
    Eigen::VectorXd ks(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) ks(i) = cov(p, x[i]);
    return {ks.dot(alpha), cov(p, p) - ks.dot(k_inv * ks)};
  }
};

// ---------------------------------------------------------------- intervals

inline double gauss_legendre(const std::function<double(double)>& f, double a, double b, int panels = 6) {
  static const std::array<double, 8> x = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                          -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                          0.7966664774136267,  0.9602898564975363};
  static const std::array<double, 8> w = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                          0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                          0.2223810344533745, 0.1012285362903763};
  if (b <= a) return 0.0;
  double sum = 0.0;
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h;
    for (int i = 0; i < 8; ++i) sum += 0.5 * h * w[i] * f(lo + 0.5 * h * (x[i] + 1.0));
  }
  return sum;
}

// P(lo <= mean + nu < hi) with nu a truncated Gaussian, by quadrature.
inline double window_probability(double lo, double hi, double mean, double sigma, double support) {
  const auto pdf = [&](double t) { return std::exp(-0.5 * t * t / (sigma * sigma)); };
  const double z = gauss_legendre(pdf, -support, support);
  const double a = std::max(lo - mean, -support);
  const double b = std::min(hi - mean, support);
  return gauss_legendre(pdf, a, b) / z;
}

// Extremes of f over the box [lo, hi]^2 from a 41x41 grid; the maximum is
// polished by alternating golden-section line searches.
struct Extremes {
  double min;
  double max;
};

// Golden-section search for the maximum of f on [a, b]; returns the argmax.
inline double golden_argmax(const std::function<double(double)>& f, double a, double b) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > 1e-12) {
    if (fc < fd) {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    } else {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    }
  }
  return 0.5 * (a + b);
}

inline Extremes box_extremes(const std::function<double(double, double)>& f, std::array<double, 2> lo,
                             std::array<double, 2> hi) {
  constexpr int kGrid = 41;
  Extremes e{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  std::array<double, 2> best = lo;
  const double sx = (hi[0] - lo[0]) / (kGrid - 1), sy = (hi[1] - lo[1]) / (kGrid - 1);
  for (int i = 0; i < kGrid; ++i) {
    for (int j = 0; j < kGrid; ++j) {
      const double x = lo[0] + sx * i, y = lo[1] + sy * j;
      const double v = f(x, y);
      e.min = std::min(e.min, v);
      if (v > e.max) {
        e.max = v;
        best = {x, y};
      }
    }
  }
  for (int sweep = 0; sweep < 4; ++sweep) {
    best[0] = golden_argmax([&](double x) { return f(x, best[1]); }, std::max(lo[0], best[0] - sx),
                            std::min(hi[0], best[0] + sx));
    best[1] = golden_argmax([&](double y) { return f(best[0], y); }, std::max(lo[1], best[1] - sy),
                            std::min(hi[1], best[1] + sy));
    e.max = std::max(e.max, f(best[0], best[1]));
  }
  return e;
}

// ------------------------------------------------------------ interval VI

// All vertices of {p : lo <= p <= hi, sum p = 1}.
inline std::vector<std::vector<double>> polytope_vertices(const Choice& c) {
  const std::size_t k = c.edges.size();
  std::vector<std::vector<double>> out;
  for (std::size_t free = 0; free < k; ++free) {
    for (std::size_t bits = 0; bits < (std::size_t{1} << (k - 1)); ++bits) {
      std::vector<double> p(k);
      double sum = 0.0;
      std::size_t b = 0;
      for (std::size_t i = 0; i < k; ++i) {
        if (i == free) continue;
        p[i] = ((bits >> b++) & 1u) ? c.edges[i].upper : c.edges[i].lower;
        sum += p[i];
      }
      p[free] = 1.0 - sum;
      if (p[free] >= c.edges[free].lower - 1e-12 && p[free] <= c.edges[free].upper + 1e-12) out.push_back(p);
    }
  }
  return out;
}

inline std::vector<double> value_iteration(const IntervalMdp& mdp, const std::vector<bool>& target, bool worst,
                                           double tolerance, int max_sweeps = 100000) {
  const int n = mdp.size();
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) v[s] = target[s] ? 1.0 : 0.0;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    std::vector<double> next = v;
    double residual = 0.0;
    for (int s = 0; s < n; ++s) {
      if (target[s]) continue;
      double best = 0.0;
      bool any = false;
      for (const Choice& c : mdp.choices[s]) {
        double pick = worst ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        for (const auto& p : polytope_vertices(c)) {
          double e = 0.0;
          for (std::size_t i = 0; i < p.size(); ++i) e += p[i] * v[c.edges[i].target];
          pick = worst ? std::min(pick, e) : std::max(pick, e);
        }
        if (!any || pick > best) best = pick;
        any = true;
      }
      next[s] = best;
      residual = std::max(residual, std::abs(best - v[s]));
    }
    v = next;
    if (residual < tolerance) break;
  }
  return v;
}

// Random IMDP whose rows are consistent by construction: a random
// distribution widened into intervals.
inline IntervalMdp random_imdp(Rng& rng, int states, int actions, int max_successors, double width = 0.3) {
  IntervalMdp mdp;
  mdp.choices.resize(static_cast<std::size_t>(states));
  for (int s = 0; s < states; ++s) {
    for (int a = 0; a < actions; ++a) {
      if (a > 0 && rng.bernoulli(0.3)) continue;
      Choice c;
      c.action = a;
      std::vector<int> succ(static_cast<std::size_t>(states));
      for (int i = 0; i < states; ++i) succ[i] = i;
      for (int i = states - 1; i > 0; --i) std::swap(succ[i], succ[rng.index(static_cast<std::uint64_t>(i) + 1)]);
      const int k = 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(std::min(max_successors, states))));
      succ.resize(static_cast<std::size_t>(k));
      std::sort(succ.begin(), succ.end());
      std::vector<double> p(static_cast<std::size_t>(k));
      double sum = 0.0;
      for (double& x : p) sum += (x = rng.uniform(0.05, 1.0));
      for (int i = 0; i < k; ++i) {
        const double q = p[i] / sum;
        const double lo = std::max(0.0, q - rng.uniform(0.0, width));
        const double hi = std::min(1.0, q + rng.uniform(0.0, width));
        c.edges.push_back({succ[i], k == 1 ? 1.0 : lo, k == 1 ? 1.0 : hi});
      }
      mdp.choices[s].push_back(std::move(c));
    }
  }
  return mdp;
}

// ------------------------------------------------------------------- MECs

inline bool strongly_connected(const IntervalMdp& mdp, const std::vector<int>& states,
                               const std::vector<ActionMask>& acts) {
  if (states.empty()) return false;
  const auto pos = [&](int s) { return static_cast<int>(std::find(states.begin(), states.end(), s) - states.begin()); };
  const int k = static_cast<int>(states.size());
  std::vector<std::vector<bool>> reach(k, std::vector<bool>(k, false));
  for (int i = 0; i < k; ++i) {
    reach[i][i] = true;
    for (const Choice& c : mdp.choices[states[i]]) {
      if (!mask_has(acts[i], c.action)) continue;
      for (const IntervalEdge& e : c.edges) {
        if (e.upper > 0.0) reach[i][pos(e.target)] = true;
      }
    }
  }
  for (int m = 0; m < k; ++m)
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) reach[i][j] = reach[i][j] || (reach[i][m] && reach[m][j]);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (!reach[i][j]) return false;
  return true;
}

inline ActionMask closed_actions(const IntervalMdp& mdp, int s, std::uint32_t subset, ActionMask allowed) {
  ActionMask m = 0;
  for (const Choice& c : mdp.choices[s]) {
    if (!mask_has(allowed, c.action)) continue;
    const bool inside = std::all_of(c.edges.begin(), c.edges.end(),
                                    [&](const IntervalEdge& e) { return e.upper <= 0.0 || ((subset >> e.target) & 1u); });
    if (inside) m |= ActionMask{1} << c.action;
  }
  return m;
}

// Maximal end components by enumerating every state subset with its largest
// closed action map.
inline std::vector<Mec> mecs(const IntervalMdp& mdp, const ActionMap* allowed = nullptr,
                             std::uint32_t universe = ~0u) {
  const int n = mdp.size();
  std::vector<std::uint32_t> ecs;
  std::vector<Mec> data;
  for (std::uint32_t subset = 1; subset < (1u << n); ++subset) {
    if ((subset & universe) != subset) continue;
    Mec m;
    bool ok = true;
    for (int s = 0; s < n && ok; ++s) {
      if (!((subset >> s) & 1u)) continue;
      const ActionMask a = closed_actions(mdp, s, subset, allowed ? (*allowed)[s] : ~0u);
      if (a == 0) ok = false;
      m.states.push_back(s);
      m.actions.push_back(a);
    }
    if (!ok || !strongly_connected(mdp, m.states, m.actions)) continue;
    ecs.push_back(subset);
    data.push_back(std::move(m));
  }
  std::vector<Mec> out;
  for (std::size_t i = 0; i < ecs.size(); ++i) {
    const bool maximal = std::none_of(ecs.begin(), ecs.end(), [&](std::uint32_t o) {
      return o != ecs[i] && (o & ecs[i]) == ecs[i];
    });
    if (maximal) out.push_back(data[i]);
  }
  std::sort(out.begin(), out.end(), [](const Mec& a, const Mec& b) { return a.states < b.states; });
  return out;
}

// Same answer through every (subset, action-map) pair; only for tiny models.
inline std::vector<Mec> mecs_by_action_maps(const IntervalMdp& mdp) {
  const int n = mdp.size();
  struct Ec {
    std::uint32_t subset;
    std::vector<ActionMask> acts;
  };
  std::vector<Ec> ecs;
  for (std::uint32_t subset = 1; subset < (1u << n); ++subset) {
    std::vector<int> states;
    std::vector<ActionMask> closed;
    for (int s = 0; s < n; ++s) {
      if ((subset >> s) & 1u) {
        states.push_back(s);
        closed.push_back(closed_actions(mdp, s, subset, ~0u));
      }
    }
    if (std::any_of(closed.begin(), closed.end(), [](ActionMask m) { return m == 0; })) continue;
    std::vector<ActionMask> acts(states.size(), 0);
    // Odometer over non-empty sub-masks of each state's closed actions.
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
      if (i == states.size()) {
        if (strongly_connected(mdp, states, acts)) ecs.push_back({subset, acts});
        return;
      }
      for (ActionMask sub = closed[i]; sub; sub = (sub - 1) & closed[i]) {
        acts[i] = sub;
        rec(i + 1);
      }
    };
    rec(0);
  }
  const auto contains = [&](const Ec& big, const Ec& small) {
    if ((big.subset & small.subset) != small.subset) return false;
    int bi = 0, si = 0;
    for (int s = 0; s < n; ++s) {
      const bool in_b = (big.subset >> s) & 1u, in_s = (small.subset >> s) & 1u;
      if (in_s && (small.acts[si] & ~big.acts[bi])) return false;
      bi += in_b;
      si += in_s;
    }
    return true;
  };
  std::vector<Mec> out;
  for (const Ec& e : ecs) {
    const bool maximal = std::none_of(ecs.begin(), ecs.end(), [&](const Ec& o) {
      return (o.subset != e.subset || o.acts != e.acts) && contains(o, e);
    });
    if (!maximal) continue;
    Mec m;
    for (int s = 0; s < n; ++s)
      if ((e.subset >> s) & 1u) m.states.push_back(s);
    m.actions = e.acts;
    out.push_back(std::move(m));
  }
  std::sort(out.begin(), out.end(), [](const Mec& a, const Mec& b) { return a.states < b.states; });
  return out;
}

// ---------------------------------------------------------------- pruning

// Largest state set in which every state keeps an action with all successors
// inside and can reach `goal` inside; the union of all such sets.
inline std::vector<bool> surviving_states(const IntervalMdp& mdp, const std::vector<bool>& goal,
                                          const std::vector<bool>& candidates) {
  const int n = mdp.size();
  std::uint32_t best = 0;
  for (std::uint32_t subset = 1; subset < (1u << n); ++subset) {
    bool ok = true;
    for (int s = 0; s < n && ok; ++s) {
      if (((subset >> s) & 1u) && !candidates[s]) ok = false;
    }
    if (!ok) continue;
    std::vector<ActionMask> acts(static_cast<std::size_t>(n), 0);
    for (int s = 0; s < n && ok; ++s) {
      if (!((subset >> s) & 1u)) continue;
      acts[s] = closed_actions(mdp, s, subset, ~0u);
      if (acts[s] == 0) ok = false;
    }
    if (!ok) continue;
    std::uint32_t reach = 0;
    for (int s = 0; s < n; ++s)
      if (((subset >> s) & 1u) && goal[s]) reach |= 1u << s;
    for (bool grew = true; grew;) {
      grew = false;
      for (int s = 0; s < n; ++s) {
        if (!((subset >> s) & 1u) || ((reach >> s) & 1u)) continue;
        for (const Choice& c : mdp.choices[s]) {
          if (!mask_has(acts[s], c.action)) continue;
          if (std::any_of(c.edges.begin(), c.edges.end(),
                          [&](const IntervalEdge& e) { return e.upper > 0.0 && ((reach >> e.target) & 1u); })) {
            reach |= 1u << s;
            grew = true;
            break;
          }
        }
      }
    }
    if (reach == subset) best |= subset;
  }
  std::vector<bool> out(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) out[s] = (best >> s) & 1u;
  return out;
}

// ---------------------------------------------------------------- automata

// Finite-prefix verdict of !haz U goal, with an observation carrying both
// symbols counted as a hazard: +1 satisfied, -1 violated, 0 undetermined.
inline int until_verdict(const std::vector<std::pair<bool, bool>>& word) {
  for (const auto& [goal, haz] : word) {
    if (haz) return -1;
    if (goal) return 1;
  }
  return 0;
}

}  // namespace hopnav::oracle
