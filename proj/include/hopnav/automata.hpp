#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hopnav/abstraction.hpp"

namespace hopnav {

struct RabinPair {
  std::vector<int> good;  // visited infinitely often
  std::vector<int> bad;   // visited finitely often

  bool operator==(const RabinPair&) const = default;
};

/// Deterministic Rabin automaton over observations encoded as bitmasks of
/// `alphabet` symbols.
struct Dra {
  int state_count = 0;
  int initial = 0;
  std::vector<std::string> alphabet;
  std::map<std::pair<int, Observation>, int> transitions;
  std::vector<RabinPair> pairs;

  /// Successor or -1 if undefined.
  int next(int state, Observation obs) const;
  int symbol(const std::string& name) const;  // -1 when absent
  bool operator==(const Dra&) const = default;
};

/// Line format:
///   states <n>
///   init <i>
///   alphabet <sym> ...
///   trans <s> <obs> <s'>     obs = comma-joined symbols or '-'
///   pair G:{i,j} B:{k}
/// '#' starts a comment.
Dra parse_dra(std::string_view text);
std::string print_dra(const Dra& dra);

/// !hazard U goal; state 0 pending, 1 accepting, 2 rejecting. An observation
/// holding both symbols counts as a hazard.
Dra build_until_dra(const std::string& goal, const std::string& hazard);

struct MtPimdp {
  IntervalMdp mdp;
  int cell_count = 0;  // abstraction states, including any sink
  int dra_states = 0;
  std::vector<int> initial;
  std::vector<RabinPair> pairs;  // over DRA states
  std::vector<double> reward;    // per abstraction state

  int size() const { return mdp.size(); }
  int state(int q, int s) const { return q * dra_states + s; }
  int cell(int p) const { return p / dra_states; }
  int dra_state(int p) const { return p % dra_states; }
  double reward_of(int p) const { return reward[cell(p)]; }
};

/// Product transitions are guarded by the label of the source cell. The
/// initial product state is (q0, delta(s0, L(q0))) for every q0 in
/// imdp.initial.
MtPimdp product(const Imdp& imdp, const Dra& dra, std::vector<double> reward);

/// Re-encodes a partition label into the DRA alphabet.
Observation project_label(Observation label, const std::vector<std::string>& from, const Dra& dra);

}  // namespace hopnav
