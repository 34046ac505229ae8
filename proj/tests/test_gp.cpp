#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "hopnav/gp.hpp"
#include "hopnav/rng.hpp"
#include "oracles.hpp"

using namespace hopnav;

namespace {

std::vector<Vec2> random_points(std::size_t n, std::uint64_t seed, double extent = 15.0) {
  Rng rng(seed);
  std::vector<Vec2> out(n);
  for (Vec2& p : out) p = Vec2(rng.uniform(0.0, extent), rng.uniform(0.0, extent));
  return out;
}

}  // namespace

TEST_CASE("prior model") {
  const SparseGp gp = SparseGp::prior({});
  CHECK(gp.is_prior());
  const GpPrediction p = gp.predict(Vec2(3.0, 4.0));
  CHECK(p.mean == 0.0);
  CHECK(p.variance == doctest::Approx(0.09));
}

TEST_CASE("single observation contracts the posterior") {
  const std::vector<Vec2> x = {Vec2(2.0, 2.0)};
  const std::vector<double> y = {0.4};
  const SparseGp gp = SparseGp::fit(x, y, 1, {}, 1);
  const GpPrediction p = gp.predict(x[0]);
  CHECK(p.mean == doctest::Approx(0.4 * 0.09 / 0.1).epsilon(1e-6));
  CHECK(p.variance < 0.09);
  CHECK(p.variance == doctest::Approx(0.09 - 0.09 * 0.09 / 0.1).epsilon(1e-6));
}

TEST_CASE("sparse model recovers a smooth synthetic field") {
  const auto x = random_points(500, 11);
  Rng noise(12);
  std::vector<double> y;
  for (const Vec2& p : x) y.push_back(0.2 * std::sin(p.x() / 3.0) + 0.02 * noise.normal());
  const SparseGp gp = SparseGp::fit(x, y, 50, {}, 3);
  CHECK(gp.inducing_points().size() == 50);
  double se = 0.0;
  int count = 0;
  for (double gx = 0.25; gx < 15.0; gx += 0.5) {
    for (double gy = 0.25; gy < 15.0; gy += 0.5) {
      const double e = gp.predict(Vec2(gx, gy)).mean - 0.2 * std::sin(gx / 3.0);
      se += e * e;
      ++count;
    }
  }
  CHECK(std::sqrt(se / count) <= 0.05);
}

TEST_CASE("inducing set equal to the data reproduces the exact GP") {
  const auto x = random_points(40, 21, 8.0);
  Rng r(22);
  std::vector<double> y;
  for (std::size_t i = 0; i < x.size(); ++i) y.push_back(r.uniform(-0.3, 0.3));
  const SparseGp gp = SparseGp::fit(x, y, x.size(), {}, 1);
  const oracle::ExactGp exact(x, y, {});
  for (const Vec2& p : x) {
    const GpPrediction a = gp.predict(p);
    const GpPrediction b = exact.predict(p);
    CHECK(std::abs(a.mean - b.mean) < 1e-6);
    CHECK(std::abs(a.variance - b.variance) < 1e-6);
  }
}

TEST_CASE("far from data the posterior reverts to the prior") {
  const auto x = random_points(60, 31, 5.0);
  std::vector<double> y(x.size(), 0.25);
  const SparseGp gp = SparseGp::fit(x, y, 20, {}, 2);
  const GpPrediction p = gp.predict(Vec2(40.0, 40.0));
  CHECK(std::abs(p.mean) < 1e-6);
  CHECK(p.variance == doctest::Approx(0.09).epsilon(0.01));
}

TEST_CASE("repeated observations contract the variance to the noise level") {
  std::vector<Vec2> x(100, Vec2(4.0, 4.0));
  auto more = random_points(50, 41);
  x.insert(x.end(), more.begin(), more.end());
  Rng r(42);
  std::vector<double> y;
  for (std::size_t i = 0; i < x.size(); ++i) y.push_back(0.1 + 0.1 * r.normal());
  const SparseGp gp = SparseGp::fit(x, y, 50, {}, 3);
  CHECK(gp.predict(Vec2(4.0, 4.0)).variance <= 0.01 * 1.1);
}

TEST_CASE("predictions do not depend on data order") {
  auto x = random_points(120, 51);
  std::vector<double> y;
  for (const Vec2& p : x) y.push_back(std::cos(p.y() / 2.0) * 0.1);
  const SparseGp a = SparseGp::fit(x, y, 30, {}, 5);
  std::vector<std::size_t> order(x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = (i * 37) % order.size();
  std::vector<Vec2> xp;
  std::vector<double> yp;
  for (std::size_t i : order) {
    xp.push_back(x[i]);
    yp.push_back(y[i]);
  }
  const SparseGp b = SparseGp::fit(xp, yp, 30, {}, 5);
  for (const Vec2& q : random_points(20, 52)) {
    CHECK(a.predict(q).mean == doctest::Approx(b.predict(q).mean).epsilon(1e-9));
    CHECK(a.predict(q).variance == doctest::Approx(b.predict(q).variance).epsilon(1e-9));
  }
}

TEST_CASE("posterior variance is bounded by the prior and shrinks with data") {
  auto x = random_points(80, 61);
  std::vector<double> y(x.size(), 0.0);
  const SparseGp before = SparseGp::fit(x, y, x.size(), {}, 1);
  const Vec2 spot(7.5, 7.5);
  x.push_back(spot);
  y.push_back(0.0);
  const SparseGp after = SparseGp::fit(x, y, x.size(), {}, 1);
  CHECK(after.predict(spot).variance <= before.predict(spot).variance + 1e-9);
  for (const Vec2& q : random_points(50, 62, 20.0)) {
    CHECK(before.predict(q).variance <= 0.09 + 1e-12);
    CHECK(before.predict(q).variance >= 0.0);
  }
}

TEST_CASE("lengthscale selection picks a value from the grid") {
  const auto x = random_points(150, 71);
  std::vector<double> y;
  for (const Vec2& p : x) y.push_back(0.2 * std::sin(p.x()));
  KernelSettings k;
  k.optimize_lengthscale = true;
  const SparseGp gp = SparseGp::fit(x, y, 40, k, 1);
  CHECK(gp.kernel().lengthscale >= 1.0);
  CHECK(gp.kernel().lengthscale <= 2.0);
}

TEST_CASE("residuals from a hop log") {
  std::vector<HopObservation> log;
  for (int i = 0; i < 5; ++i) {
    HopObservation h;
    h.start = Vec2(i, 2.0 * i);
    h.predicted_displacement = Vec2(1.0, 0.0);
    h.realized_displacement = Vec2(1.0, 0.0);
    log.push_back(h);
  }
  const ResidualDataset zero = residuals_from_log(log);
  for (const Vec2& r : zero.residuals) CHECK(r.norm() == 0.0);
  for (HopObservation& h : log) h.realized_displacement += Vec2(0.3, -0.1);
  const ResidualDataset shifted = residuals_from_log(log);
  REQUIRE(shifted.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(shifted.residuals[i] == Vec2(1.3, -0.1) - Vec2(1.0, 0.0));
    CHECK(shifted.inputs[i] == log[i].start);
  }
}

TEST_CASE("sampled perturbation field is recovered from 200 noisy hops") {
  const GridField fx(Vec2(0.5, 0.5), Vec2(1.0, 1.0), 15, 15, 3.0, 0.3, 81);
  const GridField fy(Vec2(0.5, 0.5), Vec2(1.0, 1.0), 15, 15, 3.0, 0.3, 82);
  Rng rng(83);
  std::vector<HopObservation> log;
  for (int i = 0; i < 200; ++i) {
    HopObservation h;
    h.start = Vec2(rng.uniform(0.0, 15.0), rng.uniform(0.0, 15.0));
    h.predicted_displacement = Vec2(1.0, 0.0);
    h.realized_displacement = h.predicted_displacement + Vec2(fx(h.start), fy(h.start)) +
                              Vec2(rng.truncated_normal(0.1, 0.2), rng.truncated_normal(0.1, 0.2));
    log.push_back(h);
  }
  const GpPair gps = fit_residual_gps(residuals_from_log(log), 50, {}, 1);
  double se = 0.0;
  int n = 0;
  for (double gx = 0.5; gx < 15.0; gx += 1.0) {
    for (double gy = 0.5; gy < 15.0; gy += 1.0) {
      const Vec2 p(gx, gy);
      se += std::pow(gps.x.predict(p).mean - fx(p), 2) + std::pow(gps.y.predict(p).mean - fy(p), 2);
      n += 2;
    }
  }
  CHECK(std::sqrt(se / n) <= 0.08);
}

TEST_CASE("grid field interpolates its node values") {
  const GridField f(Vec2(0.5, 0.5), Vec2(1.0, 1.0), 4, 3, 3.0, 0.3, 9);
  CHECK(f(Vec2(1.5, 0.5)) == doctest::Approx(f.at_node(1, 0)));
  CHECK(f(Vec2(1.0, 0.5)) == doctest::Approx(0.5 * (f.at_node(0, 0) + f.at_node(1, 0))));
  CHECK(f(Vec2(-5.0, -5.0)) == doctest::Approx(f.at_node(0, 0)));
  CHECK(f(Vec2(50.0, 50.0)) == doctest::Approx(f.at_node(3, 2)));
}

TEST_CASE("empty dataset gives prior models") {
  const GpPair gps = fit_residual_gps({}, 50, {}, 1);
  CHECK(gps.x.is_prior());
  CHECK(gps.y.is_prior());
}
