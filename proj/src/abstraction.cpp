#include "hopnav/abstraction.hpp"

#include <algorithm>
#include <cmath>

#include "hopnav/error.hpp"

namespace hopnav {

std::string action_name(int action) {
  static const char* names[kActionCount] = {"N1", "N2", "E1", "E2", "S1", "S2", "W1", "W2", "Stay"};
  if (action < 0 || action >= kActionCount) throw Error(ErrorCode::InvalidArgument, "unknown action index");
  return names[action];
}

std::array<int, 2> action_offset(int action) {
  if (action == kStayAction) return {0, 0};
  if (action < 0 || action >= kHopActionCount) throw Error(ErrorCode::InvalidArgument, "unknown action index");
  const HopAction a = kHopActions[action];
  switch (a.direction) {
    case Direction::North: return {0, a.length};
    case Direction::East: return {a.length, 0};
    case Direction::South: return {0, -a.length};
    case Direction::West: return {-a.length, 0};
  }
  return {0, 0};
}

Partition::Partition(Vec2 lower, Vec2 upper, double cell_size) : lower_(lower), upper_(upper), cell_(cell_size) {
  if (!(cell_size > 0.0)) throw Error(ErrorCode::NonTiling, "cell size must be positive");
  const Vec2 cells = (upper - lower) / cell_size;
  for (int a = 0; a < 2; ++a) {
    if (!(cells(a) >= 0.5) || std::abs(cells(a) - std::round(cells(a))) > 1e-9) {
      throw Error(ErrorCode::NonTiling, "workspace extent is not a positive multiple of the cell size");
    }
  }
  nx_ = static_cast<int>(std::round(cells.x()));
  ny_ = static_cast<int>(std::round(cells.y()));
  labels_.assign(static_cast<std::size_t>(nx_ * ny_), 0);
}

Vec2 Partition::cell_lower(int q) const { return lower_ + cell_ * Vec2(ix(q), iy(q)); }
Vec2 Partition::cell_upper(int q) const { return lower_ + cell_ * Vec2(ix(q) + 1, iy(q) + 1); }
Vec2 Partition::center(int q) const { return 0.5 * (cell_lower(q) + cell_upper(q)); }

std::optional<int> Partition::locate(const Vec2& p) const {
  if (p.x() < lower_.x() || p.y() < lower_.y() || p.x() >= upper_.x() || p.y() >= upper_.y()) return std::nullopt;
  const int i = std::min(static_cast<int>(std::floor((p.x() - lower_.x()) / cell_)), nx_ - 1);
  const int j = std::min(static_cast<int>(std::floor((p.y() - lower_.y()) / cell_)), ny_ - 1);
  return index(i, j);
}

int Partition::proposition(const std::string& name) const {
  const auto it = std::find(propositions_.begin(), propositions_.end(), name);
  return it == propositions_.end() ? -1 : static_cast<int>(it - propositions_.begin());
}

int Partition::add_proposition(const std::string& name) {
  const int existing = proposition(name);
  if (existing >= 0) return existing;
  if (propositions_.size() >= 32) throw Error(ErrorCode::InvalidArgument, "at most 32 propositions are supported");
  propositions_.push_back(name);
  return static_cast<int>(propositions_.size()) - 1;
}

void Partition::add_label(int q, const std::string& name) {
  if (q < 0 || q >= size()) throw Error(ErrorCode::InvalidArgument, "cell index out of range");
  labels_[q] |= Observation{1} << add_proposition(name);
}

bool Partition::has_label(int q, const std::string& name) const {
  const int p = proposition(name);
  return p >= 0 && (labels_[q] >> p) & 1u;
}

Observation Partition::observation(const std::vector<std::string>& names) const {
  Observation obs = 0;
  for (const std::string& n : names) {
    const int p = proposition(n);
    if (p >= 0) obs |= Observation{1} << p;
  }
  return obs;
}

Partition build_partition(Vec2 lower, Vec2 upper, double cell_size) { return Partition(lower, upper, cell_size); }

std::optional<int> action_target(const Partition& partition, int q, int action) {
  if (action < 0 || action >= kHopActionCount) return std::nullopt;
  const auto [dx, dy] = action_offset(action);
  const int i = partition.ix(q) + dx;
  const int j = partition.iy(q) + dy;
  if (i < 0 || j < 0 || i >= partition.nx() || j >= partition.ny()) return std::nullopt;
  return partition.index(i, j);
}

const Choice* IntervalMdp::find(int state, int action) const {
  for (const Choice& c : choices[state]) {
    if (c.action == action) return &c;
  }
  return nullptr;
}

bool IntervalMdp::consistent(double slack) const {
  for (const auto& row : choices) {
    for (const Choice& c : row) {
      double lo = 0.0, hi = 0.0;
      for (const IntervalEdge& e : c.edges) {
        if (e.lower < -slack || e.upper > 1.0 + slack || e.lower > e.upper + slack) return false;
        lo += e.lower;
        hi += e.upper;
      }
      if (lo > 1.0 + slack || hi < 1.0 - slack) return false;
    }
  }
  return true;
}

namespace {

double truncated_cdf(double t, const NoiseModel& noise) {
  if (t <= -noise.support) return 0.0;
  if (t >= noise.support) return 1.0;
  const auto phi = [&](double x) { return 0.5 * std::erfc(-x / (noise.sigma * std::sqrt(2.0))); };
  const double lo = phi(-noise.support);
  return (phi(t) - lo) / (phi(noise.support) - lo);
}

struct AxisBounds {
  double lower;
  double upper;
};

// Extremes of the window probability over mean offsets m in [m_lo, m_hi]
// for landing = origin + m + nu. The function is unimodal in m with its peak
// where the window is centred on the origin, so the minimum sits at an end
// of the range and the maximum at the clamped peak.
AxisBounds axis_bounds(double lo, double hi, double origin, double m_lo, double m_hi, const NoiseModel& noise) {
  const double peak = std::clamp(0.5 * (lo + hi) - origin, m_lo, m_hi);
  const double a = truncated_window_probability(lo, hi, origin + m_lo, noise);
  const double b = truncated_window_probability(lo, hi, origin + m_hi, noise);
  const double c = truncated_window_probability(lo, hi, origin + peak, noise);
  return {std::min(a, b), std::max({a, b, c})};
}

}  // namespace

double truncated_window_probability(double lo, double hi, double mean, const NoiseModel& noise) {
  if (noise.sigma <= 0.0 || noise.support <= 0.0) return (mean >= lo && mean < hi) ? 1.0 : 0.0;
  return std::max(0.0, truncated_cdf(hi - mean, noise) - truncated_cdf(lo - mean, noise));
}

Imdp estimate_intervals(const Partition& partition, const GpPair& gps, const NoiseModel& noise,
                        const IntervalSettings& settings) {
  if (noise.sigma < 0.0 || noise.support < 0.0) throw Error(ErrorCode::InvalidArgument, "noise parameters must be >= 0");
  const int n = partition.size();
  const double h = partition.cell_size();
  const double reach = noise.sigma > 0.0 ? noise.support : 0.0;

  struct Row {
    std::vector<std::pair<int, AxisBounds>> cells;  // per-axis cell index and bounds
    AxisBounds inside;
  };

  std::vector<std::vector<Choice>> rows(static_cast<std::size_t>(n));
  bool leaks = false;
  for (int q = 0; q < n; ++q) {
    const Vec2 c = partition.center(q);
    const GpPrediction px = gps.x.predict(c);
    const GpPrediction py = gps.y.predict(c);
    const double wx = settings.z_score * std::sqrt(px.variance) + settings.control_error;
    const double wy = settings.z_score * std::sqrt(py.variance) + settings.control_error;
    const std::array<double, 2> m_lo = {px.mean - wx, py.mean - wy};
    const std::array<double, 2> m_hi = {px.mean + wx, py.mean + wy};

    for (int a = 0; a < kHopActionCount; ++a) {
      const auto target = action_target(partition, q, a);
      if (!target) continue;
      const Vec2 t = partition.center(*target);
      std::array<Row, 2> axis;
      for (int d = 0; d < 2; ++d) {
        const int count = d == 0 ? partition.nx() : partition.ny();
        const double lo_ws = partition.lower()(d);
        const double land_lo = t(d) + m_lo[d] - reach;
        const double land_hi = t(d) + m_hi[d] + reach;
        const int first = std::max(0, static_cast<int>(std::floor((land_lo - lo_ws) / h)));
        const int last = std::min(count - 1, static_cast<int>(std::floor((land_hi - lo_ws) / h)));
        for (int i = first; i <= last; ++i) {
          const AxisBounds b = axis_bounds(lo_ws + i * h, lo_ws + (i + 1) * h, t(d), m_lo[d], m_hi[d], noise);
          if (b.upper > 0.0) axis[d].cells.push_back({i, b});
        }
        axis[d].inside = axis_bounds(lo_ws, partition.upper()(d), t(d), m_lo[d], m_hi[d], noise);
      }

      Choice choice;
      choice.action = a;
      for (const auto& [j, by] : axis[1].cells) {
        for (const auto& [i, bx] : axis[0].cells) {
          choice.edges.push_back({partition.index(i, j), bx.lower * by.lower, bx.upper * by.upper});
        }
      }
      const double out_hi = 1.0 - axis[0].inside.lower * axis[1].inside.lower;
      if (out_hi > 1e-12) {
        const double out_lo = std::max(0.0, 1.0 - axis[0].inside.upper * axis[1].inside.upper);
        choice.edges.push_back({n, out_lo, out_hi});
        leaks = true;
      }
      std::sort(choice.edges.begin(), choice.edges.end(),
                [](const IntervalEdge& l, const IntervalEdge& r) { return l.target < r.target; });
      rows[q].push_back(std::move(choice));
    }
  }

  Imdp imdp;
  imdp.partition = partition;
  imdp.labels.resize(static_cast<std::size_t>(n));
  for (int q = 0; q < n; ++q) imdp.labels[q] = partition.label(q);
  if (leaks) {
    imdp.sink = n;
    Observation obs = 0;
    for (const std::string& name : settings.out_of_bounds_labels) {
      obs |= Observation{1} << imdp.partition.add_proposition(name);
    }
    imdp.labels.push_back(obs);
    rows.push_back({Choice{kStayAction, {{n, 1.0, 1.0}}}});
  }
  imdp.mdp.choices = std::move(rows);
  return imdp;
}

}  // namespace hopnav
