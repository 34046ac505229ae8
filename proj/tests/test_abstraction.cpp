#include <cmath>
#include <set>

#include "doctest.h"
#include "hopnav/abstraction.hpp"
#include "hopnav/error.hpp"
#include "oracles.hpp"

using namespace hopnav;

namespace {

GpPair random_gps(std::uint64_t seed, int n) {
  Rng rng(seed);
  ResidualDataset d;
  for (int i = 0; i < n; ++i) {
    d.inputs.push_back(Vec2(rng.uniform(0.0, 8.0), rng.uniform(0.0, 8.0)));
    d.residuals.push_back(Vec2(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)));
  }
  return fit_residual_gps(d, 20, {}, seed);
}

}  // namespace

TEST_CASE("case-study partition") {
  const Partition p = build_partition(Vec2(0, 0), Vec2(15, 15), 1.0);
  CHECK(p.size() == 225);
  CHECK(p.center(0) == Vec2(0.5, 0.5));
  for (int q = 0; q < p.size(); ++q) {
    CHECK(p.locate(p.center(q)) == q);
    CHECK(p.center(q) == 0.5 * (p.cell_lower(q) + p.cell_upper(q)));
  }
  CHECK_FALSE(p.locate(Vec2(15.0, 3.0)).has_value());
  CHECK_FALSE(p.locate(Vec2(-0.01, 3.0)).has_value());
}

TEST_CASE("small partition has distinct centers") {
  const Partition p = build_partition(Vec2(0, 0), Vec2(2, 2), 1.0);
  REQUIRE(p.size() == 4);
  std::set<std::pair<double, double>> seen;
  for (int q = 0; q < 4; ++q) seen.insert({p.center(q).x(), p.center(q).y()});
  CHECK(seen.size() == 4);
}

TEST_CASE("non-divisible workspace is rejected") {
  CHECK_THROWS_AS(build_partition(Vec2(0, 0), Vec2(2.5, 2), 1.0), Error);
  try {
    build_partition(Vec2(0, 0), Vec2(2.5, 2), 1.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonTiling);
  }
}

TEST_CASE("action targets") {
  const Partition p = build_partition(Vec2(0, 0), Vec2(15, 15), 1.0);
  CHECK(action_target(p, p.index(0, 0), 0) == p.index(0, 1));  // N1
  CHECK_FALSE(action_target(p, p.index(0, 0), 4).has_value());  // S1
  CHECK(action_target(p, p.index(7, 7), 3) == p.index(9, 7));  // E2
  CHECK(action_name(3) == "E2");
  int available = 0;
  for (int a = 0; a < kHopActionCount; ++a) available += action_target(p, p.index(1, 14), a).has_value();
  CHECK(available == 5);  // N1, N2 and W2 leave the grid
}

TEST_CASE("labels") {
  Partition p = build_partition(Vec2(0, 0), Vec2(3, 3), 1.0);
  p.add_label(4, "Goal");
  p.add_label(5, "Haz");
  p.add_label(5, "Goal");
  CHECK(p.has_label(4, "Goal"));
  CHECK_FALSE(p.has_label(4, "Haz"));
  CHECK(p.label(5) == 3u);
  CHECK(p.observation({"Haz"}) == 2u);
}

TEST_CASE("delta landing gives point intervals on the target") {
  const Partition p = build_partition(Vec2(0, 0), Vec2(5, 5), 1.0);
  KernelSettings k;
  k.signal_sigma = 1e-12;
  const GpPair gps = prior_gps(k);
  const Imdp imdp = estimate_intervals(p, gps, NoiseModel{0.0, 0.0});
  CHECK(imdp.sink == -1);
  for (int q = 0; q < p.size(); ++q) {
    for (const Choice& c : imdp.mdp.choices[q]) {
      REQUIRE(c.edges.size() == 1);
      CHECK(c.edges[0].target == *action_target(p, q, c.action));
      CHECK(c.edges[0].lower == 1.0);
      CHECK(c.edges[0].upper == 1.0);
    }
  }
}

TEST_CASE("available actions are exactly the in-bounds targets") {
  const Partition p = build_partition(Vec2(0, 0), Vec2(6, 4), 1.0);
  const Imdp imdp = estimate_intervals(p, prior_gps({}), NoiseModel{});
  for (int q = 0; q < p.size(); ++q) {
    std::set<int> expected, got;
    for (int a = 0; a < kHopActionCount; ++a)
      if (action_target(p, q, a)) expected.insert(a);
    for (const Choice& c : imdp.mdp.choices[q]) got.insert(c.action);
    CHECK(expected == got);
  }
  REQUIRE(imdp.sink == p.size());
  CHECK(imdp.mdp.choices[imdp.sink].size() == 1);
  CHECK(imdp.mdp.choices[imdp.sink][0].action == kStayAction);
  CHECK(imdp.partition.has_label(0, "Haz") == false);
  CHECK(imdp.labels[imdp.sink] == imdp.partition.observation({"Haz"}));
}

TEST_CASE("every row is interval consistent") {
  const Partition p = build_partition(Vec2(0, 0), Vec2(8, 8), 1.0);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    IntervalSettings s;
    s.control_error = 0.05 * seed;
    const Imdp imdp = estimate_intervals(p, random_gps(seed, 30), NoiseModel{}, s);
    CHECK(imdp.mdp.consistent());
  }
}

TEST_CASE("prior-only intervals match quadrature and dense mean-set search") {
  const Partition p = build_partition(Vec2(0, 0), Vec2(15, 15), 1.0);
  const NoiseModel noise{0.1, 0.2};
  const Imdp imdp = estimate_intervals(p, prior_gps({}), noise);
  const int q = p.index(7, 7);
  const Choice* c = imdp.mdp.find(q, 2);  // E1
  REQUIRE(c != nullptr);
  const Vec2 t = p.center(*action_target(p, q, 2));
  for (const IntervalEdge& e : c->edges) {
    const Vec2 lo = p.cell_lower(e.target), hi = p.cell_upper(e.target);
    const auto f = [&](double mx, double my) {
      return oracle::window_probability(lo.x(), hi.x(), t.x() + mx, 0.1, 0.2) *
             oracle::window_probability(lo.y(), hi.y(), t.y() + my, 0.1, 0.2);
    };
    const oracle::Extremes ex = oracle::box_extremes(f, {-0.6, -0.6}, {0.6, 0.6});
    CHECK(std::abs(ex.min - e.lower) < 1e-6);
    CHECK(std::abs(ex.max - e.upper) < 1e-6);
  }
}

TEST_CASE("narrower GP variance never widens the intervals") {
  const Partition p = build_partition(Vec2(0, 0), Vec2(6, 6), 1.0);
  const NoiseModel noise{0.1, 0.2};
  KernelSettings wide, narrow;
  narrow.signal_sigma = 0.15;
  const Imdp a = estimate_intervals(p, prior_gps(wide), noise);
  const Imdp b = estimate_intervals(p, prior_gps(narrow), noise);
  for (int q = 0; q < p.size(); ++q) {
    for (const Choice& cb : b.mdp.choices[q]) {
      const Choice* ca = a.mdp.find(q, cb.action);
      REQUIRE(ca != nullptr);
      for (const IntervalEdge& eb : cb.edges) {
        const auto it = std::find_if(ca->edges.begin(), ca->edges.end(),
                                     [&](const IntervalEdge& e) { return e.target == eb.target; });
        REQUIRE(it != ca->edges.end());
        CHECK(eb.lower >= it->lower - 1e-9);
        CHECK(eb.upper <= it->upper + 1e-9);
      }
    }
  }
}

TEST_CASE("window probability against quadrature") {
  const NoiseModel n{0.1, 0.2};
  for (double m : {-0.3, -0.1, 0.0, 0.05, 0.17, 0.4}) {
    CHECK(truncated_window_probability(0.0, 0.25, m, n) ==
          doctest::Approx(oracle::window_probability(0.0, 0.25, m, 0.1, 0.2)).epsilon(1e-9));
  }
  CHECK(truncated_window_probability(-1.0, 1.0, 0.0, n) == 1.0);
  CHECK(truncated_window_probability(0.3, 1.0, 0.0, n) == 0.0);
}
