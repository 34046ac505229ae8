#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hopnav/dynamics.hpp"
#include "hopnav/gp.hpp"

namespace hopnav {

/// Set of atomic propositions, one bit per proposition index.
using Observation = std::uint32_t;

enum class Direction { North, East, South, West };

struct HopAction {
  Direction direction;
  int length;  // cells
};

inline constexpr int kHopActionCount = 8;
/// Self-loop action of the absorbing out-of-bounds state.
inline constexpr int kStayAction = 8;
inline constexpr int kActionCount = 9;

inline constexpr std::array<HopAction, kHopActionCount> kHopActions = {{{Direction::North, 1},
                                                                       {Direction::North, 2},
                                                                       {Direction::East, 1},
                                                                       {Direction::East, 2},
                                                                       {Direction::South, 1},
                                                                       {Direction::South, 2},
                                                                       {Direction::West, 1},
                                                                       {Direction::West, 2}}};

std::string action_name(int action);
/// Cell offset (dx, dy) of a hop action.
std::array<int, 2> action_offset(int action);

/// Uniform grid partition of an axis-aligned workspace. Cell q = iy * nx + ix.
class Partition {
 public:
  Partition() = default;
  Partition(Vec2 lower, Vec2 upper, double cell_size);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int size() const { return nx_ * ny_; }
  double cell_size() const { return cell_; }
  Vec2 lower() const { return lower_; }
  Vec2 upper() const { return upper_; }

  int index(int ix, int iy) const { return iy * nx_ + ix; }
  int ix(int q) const { return q % nx_; }
  int iy(int q) const { return q / nx_; }
  Vec2 cell_lower(int q) const;
  Vec2 cell_upper(int q) const;
  Vec2 center(int q) const;
  std::optional<int> locate(const Vec2& p) const;

  const std::vector<std::string>& propositions() const { return propositions_; }
  int proposition(const std::string& name) const;  // -1 when absent
  int add_proposition(const std::string& name);
  void add_label(int q, const std::string& name);
  Observation label(int q) const { return labels_[q]; }
  bool has_label(int q, const std::string& name) const;
  Observation observation(const std::vector<std::string>& names) const;

 private:
  Vec2 lower_ = Vec2::Zero(), upper_ = Vec2::Zero();
  double cell_ = 1.0;
  int nx_ = 0, ny_ = 0;
  std::vector<std::string> propositions_;
  std::vector<Observation> labels_;
};

Partition build_partition(Vec2 lower, Vec2 upper, double cell_size);

std::optional<int> action_target(const Partition& partition, int q, int action);

struct IntervalEdge {
  int target = 0;
  double lower = 0.0;
  double upper = 0.0;
};

struct Choice {
  int action = 0;
  std::vector<IntervalEdge> edges;  // sorted by target
};

/// States with their available actions and transition-probability intervals.
struct IntervalMdp {
  std::vector<std::vector<Choice>> choices;  // per state, sorted by action

  int size() const { return static_cast<int>(choices.size()); }
  const Choice* find(int state, int action) const;
  /// Checks 0 <= lo <= hi <= 1 and sum(lo) <= 1 <= sum(hi) per row.
  bool consistent(double slack = 1e-9) const;
};

struct Imdp {
  Partition partition;
  IntervalMdp mdp;
  std::vector<Observation> labels;  // per state, including the sink
  int sink = -1;                    // out-of-bounds state, -1 if absent
  std::vector<int> initial;

  int cell_count() const { return partition.size(); }
};

struct NoiseModel {
  double sigma = 0.1;    // m
  double support = 0.2;  // m, symmetric bound
};

struct IntervalSettings {
  double z_score = 2.0;
  double control_error = 0.0;  // m
  /// Propositions attached to the out-of-bounds state.
  std::vector<std::string> out_of_bounds_labels = {"Haz"};
};

/// P(lo <= m + nu < hi) for nu ~ N(0, sigma^2) truncated to [-b, b].
double truncated_window_probability(double lo, double hi, double mean, const NoiseModel& noise);

Imdp estimate_intervals(const Partition& partition, const GpPair& gps, const NoiseModel& noise,
                        const IntervalSettings& settings = {});

}  // namespace hopnav
