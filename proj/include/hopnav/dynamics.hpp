#pragma once

#include <Eigen/Core>
#include <functional>

#include "hopnav/rng.hpp"

namespace hopnav {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

struct SlipParams {
  double mass = 10.0;         // kg
  double stiffness = 8000.0;  // N/m
  double rest_length = 1.0;   // m
  double gravity = 9.81;      // m/s^2

  void validate() const;
};

struct IntegratorSettings {
  double step = 1e-4;             // s, fixed RK4 step
  double event_tolerance = 1e-8;  // s, bisection width for event times
  double max_flight_time = 60.0;  // s
  double max_stance_time = 10.0;  // s
  double collapse_ratio = 0.2;    // leg length floor as a fraction of l0
};

struct BodyState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double time = 0.0;
};

/// Leg touchdown angles. Pitch is measured up from the ground plane; yaw is
/// measured from the horizontal heading of the CoM velocity.
struct LegPlacement {
  double pitch = 1.5707963267948966;
  double yaw = 0.0;
};

struct ContactState {
  BodyState body;
  Vec3 foot = Vec3::Zero();
};

struct InterstitialState {
  Vec2 position = Vec2::Zero();
  Vec3 velocity = Vec3::Zero();
  int hop = 0;
};

/// State-dependent planar displacement plus bounded per-axis noise, applied at
/// the interstitial level of each hop.
struct PerturbationField {
  std::function<Vec2(const Vec2&)> displacement;
  double noise_sigma = 0.0;
  double noise_support = 0.0;

  Vec2 sample(const Vec2& at, Rng* rng) const;
};

/// Heading angle of the horizontal velocity; 0 when the body moves vertically.
double horizontal_heading(const Vec3& velocity);

/// Offset from CoM to foot at touchdown for the given velocity heading.
Vec3 foot_offset(const LegPlacement& placement, double heading, double rest_length);

double mechanical_energy(const BodyState& state, const SlipParams& params, const Vec3* foot = nullptr);

/// Ballistic flight until the CoM descends through l0*sin(pitch).
ContactState simulate_flight(const BodyState& state, const LegPlacement& placement, const SlipParams& params,
                             const IntegratorSettings& settings = {});

/// Spring-leg stance from touchdown until the leg re-extends to l0.
BodyState simulate_stance(const ContactState& contact, const SlipParams& params,
                          const IntegratorSettings& settings = {});

/// Ballistic flight until the CoM descends through `height`.
BodyState simulate_flight_to_height(const BodyState& state, double height, const SlipParams& params,
                                    const IntegratorSettings& settings = {});

struct HopTrace {
  ContactState touchdown;
  BodyState liftoff;
  InterstitialState next;
};

/// One interstitial-to-interstitial hop. The perturbation, when given, shifts
/// the landing position by f(start) + noise; `rng` is required when the
/// perturbation has nonzero noise.
InterstitialState step_hop(const InterstitialState& interstitial, const LegPlacement& placement,
                           const SlipParams& params, const PerturbationField* perturbation = nullptr,
                           Rng* rng = nullptr, const IntegratorSettings& settings = {},
                           HopTrace* trace = nullptr);

}  // namespace hopnav
