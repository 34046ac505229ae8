#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "hopnav/controller.hpp"
#include "hopnav/error.hpp"
#include "support.hpp"

using namespace hopnav;

namespace {

const std::vector<TrainingSample>& small_set() {
  static const auto data = generate_training_data(SlipParams{}, 1000, 7);
  return data;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.epochs = 5;
  return c;
}

}  // namespace

TEST_CASE("training samples stay inside the sampling ranges") {
  const auto& data = small_set();
  REQUIRE(data.size() == 1000);
  const SamplingRanges r;
  bool left = false, right = false;
  for (const TrainingSample& s : data) {
    const double speed = s.velocity.norm();
    CHECK(speed >= r.speed_min - 1e-12);
    CHECK(speed <= r.speed_max + 1e-12);
    CHECK(s.placement.pitch >= r.angles.pitch_min);
    CHECK(s.placement.pitch <= r.angles.pitch_max);
    CHECK(s.placement.yaw >= r.angles.yaw_min);
    CHECK(s.placement.yaw <= r.angles.yaw_max);
    // Lateral displacement relative to the heading takes both signs.
    const double h = horizontal_heading(s.velocity);
    const double lateral = -std::sin(h) * s.displacement.x() + std::cos(h) * s.displacement.y();
    left |= lateral > 0.05;
    right |= lateral < -0.05;
  }
  CHECK(left);
  CHECK(right);
}

TEST_CASE("samples replay through the simulator") {
  const auto& data = small_set();
  for (std::size_t i = 0; i < 20; ++i) {
    InterstitialState s;
    s.velocity = data[i].velocity;
    const InterstitialState next = step_hop(s, data[i].placement, SlipParams{});
    CHECK((next.position - data[i].displacement).norm() < 1e-9);
    CHECK((next.velocity - data[i].next_velocity).norm() < 1e-9);
  }
}

TEST_CASE("hopeless parameters exhaust sampling") {
  SlipParams p;
  p.stiffness = 60.0;
  CHECK_THROWS_AS(generate_training_data(p, 10, 1), Error);
}

TEST_CASE("training is deterministic and needs enough samples") {
  const auto& data = small_set();
  const HopModel a = train(quick_config(), data);
  const HopModel b = train(quick_config(), data);
  CHECK(a == b);
  CHECK(a.info.sample_count == 1000);
  CHECK(std::isfinite(a.info.final_loss));
  CHECK_THROWS_AS(train(quick_config(), std::span(data).first(100)), Error);
}

TEST_CASE("model files round-trip") {
  const HopModel a = train(quick_config(), small_set());
  std::stringstream buf;
  a.write(buf);
  const HopModel b = HopModel::read(buf);
  CHECK(a == b);
  const Vec3 v(1.0, 0.5, -3.0);
  CHECK((a.predict(v, {1.3, 0.2}).displacement - b.predict(v, {1.3, 0.2}).displacement).norm() == 0.0);
  std::stringstream bad("XXXX");
  CHECK_THROWS_AS(HopModel::read(bad), Error);
}

TEST_CASE("network Jacobian matches finite differences") {
  const HopModel m = train(quick_config(), small_set());
  Vec5 f;
  f << 2.0, 0.0, -3.0, 1.2, 0.3;
  Eigen::Matrix<double, 5, 2> j;
  m.evaluate_with_jacobian(f, j);
  for (int k = 0; k < 2; ++k) {
    Vec5 fp = f, fm = f;
    fp(3 + k) += 1e-6;
    fm(3 + k) -= 1e-6;
    const Vec5 fd = (m.evaluate(fp) - m.evaluate(fm)) / 2e-6;
    CHECK((fd - j.col(k)).norm() < 1e-5 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("bound penalty is zero inside the box and piecewise linear outside") {
  CHECK(bound_penalty({1.0, 0.0}) == 0.0);
  CHECK(bound_penalty({std::numbers::pi / 4, std::numbers::pi / 2}) == 0.0);
  CHECK(bound_penalty({std::numbers::pi / 4 - 0.1, 0.0}) == doctest::Approx(0.1));
  CHECK(bound_penalty({std::numbers::pi / 4 - 0.2, 0.0}) == doctest::Approx(0.2));
  CHECK(bound_penalty({2.0, -2.0}) > 0.0);
}

TEST_CASE("solver result dominates every probe point") {
  const HopModel m = train(quick_config(), small_set());
  const Vec3 v(1.1, 0.3, -3.8);
  const LegPlacement probe{1.3, 0.4};
  const HopPrediction target = m.predict(v, probe);
  const AngleSolution sol = solve_leg_angles(m, v, target.displacement, target.next_velocity);
  CHECK(sol.cost <= hop_cost(m, v, target.displacement, target.next_velocity, {}, probe) + 1e-9);
  CHECK(sol.cost >= 0.0);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const LegPlacement seed{std::numbers::pi / 4 + (i + 0.5) * std::numbers::pi / 16,
                              -std::numbers::pi / 2 + (j + 0.5) * std::numbers::pi / 4};
      const AngleSolution other = solve_leg_angles(m, v, Vec2(1.0, 0.2), v);
      CHECK(other.cost <= hop_cost(m, v, Vec2(1.0, 0.2), v, {}, seed) + 1e-12);
    }
  }
}

TEST_CASE("backup selection") {
  const HopModel& m = test::trained_model();
  const Vec3 v(1.117, 0.0, -3.841);
  SUBCASE("single candidate") {
    const BackupCandidate c{{1.0, 0.0}, v};
    CHECK(select_backup(m, v, std::span(&c, 1)).index == 0);
  }
  SUBCASE("reachable one-cell hop beats an unreachable long hop at low speed") {
    const Vec3 slow(0.6, 0.0, -1.5);
    const BackupCandidate c[] = {{{6.0, 0.0}, slow}, {{0.3, 0.0}, slow}};
    const BackupChoice pick = select_backup(m, slow, c);
    CHECK(pick.index == 1);
  }
  SUBCASE("permuting candidates permutes the index") {
    const BackupCandidate c[] = {{{1.0, 0.0}, v}, {{0.0, 1.0}, v}, {{2.0, 0.0}, v}};
    const BackupCandidate r[] = {c[2], c[0], c[1]};
    const BackupChoice a = select_backup(m, v, c);
    const BackupChoice b = select_backup(m, v, r);
    const std::size_t map[] = {1, 2, 0};
    CHECK(b.index == map[a.index]);
    CHECK(a.solution.cost == b.solution.cost);
  }
  CHECK_THROWS_AS(select_backup(m, v, std::span<const BackupCandidate>{}), Error);
}

TEST_CASE("trained model tracks a 1.5 m forward target in simulation") {
  const HopModel& m = test::trained_model();
  const SlipParams p;
  InterstitialState s;
  s.velocity = Vec3(1.117, 0.0, -3.841);
  const AngleSolution sol = solve_leg_angles(m, s.velocity, Vec2(1.5, 0.0), s.velocity);
  const InterstitialState next = step_hop(s, sol.placement, p);
  CHECK((next.position - Vec2(1.5, 0.0)).norm() <= 0.15);
}

TEST_CASE("unreachable target keeps the leg inside its limits") {
  const HopModel& m = test::trained_model();
  const Vec3 v(1.117, 0.0, -3.841);
  const AngleSolution sol = solve_leg_angles(m, v, Vec2(10.0, 0.0), v);
  CHECK(bound_penalty(sol.placement) < 1e-6);
  CHECK(sol.cost > 5.0);
  CHECK(sol.prediction.displacement.x() < 5.0);
}

TEST_CASE("model evaluated on a training point matches its recorded output") {
  const HopModel& m = test::trained_model();
  const auto& data = small_set();
  int within = 0;
  for (std::size_t i = 0; i < 200; ++i) {
    const HopPrediction p = m.predict(data[i].velocity, data[i].placement);
    within += (p.displacement - data[i].displacement).norm() <= 3.0 * std::sqrt(2.0) * m.info.validation_rmse;
  }
  CHECK(within >= 180);
}
