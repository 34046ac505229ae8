#include "hopnav/dynamics.hpp"

#include <cmath>

#include "hopnav/error.hpp"

namespace hopnav {

namespace {

using State6 = Eigen::Matrix<double, 6, 1>;

State6 pack(const BodyState& s) {
  State6 y;
  y << s.position, s.velocity;
  return y;
}

BodyState unpack(const State6& y, double t) {
  BodyState s;
  s.position = y.head<3>();
  s.velocity = y.tail<3>();
  s.time = t;
  return s;
}

template <class Deriv>
State6 rk4(const State6& y, double h, const Deriv& f) {
  const State6 k1 = f(y);
  const State6 k2 = f(y + 0.5 * h * k1);
  const State6 k3 = f(y + 0.5 * h * k2);
  const State6 k4 = f(y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Integrates until `crossed(prev, next)` fires, then bisects the final step
// until the bracket is narrower than the event tolerance. Returns the state on
// the far side of the event. `check` may throw for invalid intermediate states.
template <class Deriv, class Crossed, class Check>
bool integrate_to_event(State6& y, double& t, double max_time, const IntegratorSettings& settings,
                        const Deriv& f, const Crossed& crossed, const Check& check) {
  const double h = settings.step;
  const double t_end = t + max_time;
  while (t < t_end) {
    const State6 next = rk4(y, h, f);
    if (crossed(y, next)) {
      double lo = 0.0;
      double hi = h;
      State6 hi_state = next;
      while (hi - lo > settings.event_tolerance) {
        const double mid = 0.5 * (lo + hi);
        const State6 trial = rk4(y, mid, f);
        if (crossed(y, trial)) {
          hi = mid;
          hi_state = trial;
        } else {
          lo = mid;
        }
      }
      check(hi_state);
      y = hi_state;
      t += hi;
      return true;
    }
    check(next);
    y = next;
    t += h;
  }
  return false;
}

}  // namespace

void SlipParams::validate() const {
  if (!(mass > 0.0 && stiffness > 0.0 && rest_length > 0.0 && gravity > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "SLIP parameters must be strictly positive");
  }
}

Vec2 PerturbationField::sample(const Vec2& at, Rng* rng) const {
  Vec2 out = displacement ? displacement(at) : Vec2::Zero();
  if (noise_sigma > 0.0) {
    if (rng == nullptr) throw Error(ErrorCode::InvalidArgument, "noisy perturbation requires an RNG");
    out.x() += rng->truncated_normal(noise_sigma, noise_support);
    out.y() += rng->truncated_normal(noise_sigma, noise_support);
  }
  return out;
}

double horizontal_heading(const Vec3& velocity) {
  if (std::hypot(velocity.x(), velocity.y()) < 1e-12) return 0.0;
  return std::atan2(velocity.y(), velocity.x());
}

Vec3 foot_offset(const LegPlacement& placement, double heading, double rest_length) {
  const double yaw = heading + placement.yaw;
  const double c = std::cos(placement.pitch);
  return rest_length * Vec3(c * std::cos(yaw), c * std::sin(yaw), -std::sin(placement.pitch));
}

double mechanical_energy(const BodyState& state, const SlipParams& params, const Vec3* foot) {
  double e = 0.5 * params.mass * state.velocity.squaredNorm() + params.mass * params.gravity * state.position.z();
  if (foot != nullptr) {
    const double stretch = (state.position - *foot).norm() - params.rest_length;
    if (stretch < 0.0) e += 0.5 * params.stiffness * stretch * stretch;
  }
  return e;
}

BodyState simulate_flight_to_height(const BodyState& state, double height, const SlipParams& params,
                                    const IntegratorSettings& settings) {
  params.validate();
  const double g = params.gravity;
  const auto deriv = [g](const State6& y) {
    State6 d;
    d << y.tail<3>(), 0.0, 0.0, -g;
    return d;
  };

  const double gap = state.position.z() - height;
  if (std::abs(gap) <= 1e-12 && state.velocity.z() < 0.0) return state;
  const double apex = state.position.z() + std::max(state.velocity.z(), 0.0) * std::max(state.velocity.z(), 0.0) / (2.0 * g);
  if (apex <= height) {
    throw Error(ErrorCode::NoTouchdown, "flight apex never reaches the event height from above");
  }

  const auto crossed = [height](const State6& prev, const State6& next) {
    return prev(2) > height && next(2) <= height && next(5) < 0.0;
  };
  State6 y = pack(state);
  double t = state.time;
  if (!integrate_to_event(y, t, settings.max_flight_time, settings, deriv, crossed, [](const State6&) {})) {
    throw Error(ErrorCode::NoTouchdown, "no descent through the event height within the flight time limit");
  }
  return unpack(y, t);
}

ContactState simulate_flight(const BodyState& state, const LegPlacement& placement, const SlipParams& params,
                             const IntegratorSettings& settings) {
  const double touchdown_height = params.rest_length * std::sin(placement.pitch);
  ContactState contact;
  contact.body = simulate_flight_to_height(state, touchdown_height, params, settings);
  const double heading = horizontal_heading(contact.body.velocity);
  contact.foot = contact.body.position + foot_offset(placement, heading, params.rest_length);
  contact.foot.z() = 0.0;
  return contact;
}

BodyState simulate_stance(const ContactState& contact, const SlipParams& params, const IntegratorSettings& settings) {
  params.validate();
  const Vec3 foot = contact.foot;
  const double k_over_m = params.stiffness / params.mass;
  const double l0 = params.rest_length;
  const double g = params.gravity;

  const auto deriv = [&](const State6& y) {
    const Vec3 leg = y.head<3>() - foot;
    const double len = leg.norm();
    State6 d;
    d.head<3>() = y.tail<3>();
    d.tail<3>() = k_over_m * (l0 / len - 1.0) * leg;
    d(5) -= g;
    return d;
  };
  const auto leg_length = [&](const State6& y) { return (y.head<3>() - foot).norm(); };
  const auto crossed = [&](const State6& prev, const State6& next) {
    return leg_length(prev) < l0 && leg_length(next) >= l0;
  };
  const double floor = settings.collapse_ratio * l0;
  const auto check = [&](const State6& y) {
    if (y(2) <= 0.0) throw Error(ErrorCode::GroundPenetration, "CoM reached the ground during stance");
    if (leg_length(y) < floor) throw Error(ErrorCode::LegCollapse, "leg compressed below the minimum length");
  };

  State6 y = pack(contact.body);
  const Vec3 leg0 = contact.body.position - foot;
  // Leg already extending at touchdown: the spring never loads.
  if (leg0.dot(contact.body.velocity) >= 0.0) return contact.body;

  double t = contact.body.time;
  if (!integrate_to_event(y, t, settings.max_stance_time, settings, deriv, crossed, check)) {
    throw Error(ErrorCode::LegCollapse, "stance did not end within the time limit");
  }
  return unpack(y, t);
}

InterstitialState step_hop(const InterstitialState& interstitial, const LegPlacement& placement,
                           const SlipParams& params, const PerturbationField* perturbation, Rng* rng,
                           const IntegratorSettings& settings, HopTrace* trace) {
  params.validate();
  if (!(interstitial.velocity.z() < 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "interstitial state must be descending");
  }
  BodyState start;
  start.position = Vec3(interstitial.position.x(), interstitial.position.y(), params.rest_length);
  start.velocity = interstitial.velocity;

  const ContactState touchdown = simulate_flight(start, placement, params, settings);
  const BodyState liftoff = simulate_stance(touchdown, params, settings);

  const double vz = liftoff.velocity.z();
  const double apex = liftoff.position.z() + (vz > 0.0 ? vz * vz / (2.0 * params.gravity) : 0.0);
  if (apex <= params.rest_length + 1e-9) {
    throw Error(ErrorCode::InterstitialMissed, "apex after liftoff is below the interstitial height");
  }
  const BodyState landing = simulate_flight_to_height(liftoff, params.rest_length, params, settings);

  InterstitialState next;
  next.position = landing.position.head<2>();
  next.velocity = landing.velocity;
  next.hop = interstitial.hop + 1;
  if (perturbation != nullptr) next.position += perturbation->sample(interstitial.position, rng);

  if (trace != nullptr) {
    trace->touchdown = touchdown;
    trace->liftoff = liftoff;
    trace->next = next;
  }
  return next;
}

}  // namespace hopnav
