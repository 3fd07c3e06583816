#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "lowg/body_model.hpp"
#include "lowg/state.hpp"
#include "lowg/types.hpp"

namespace lowg {

struct GravityEnv {
  double g = 3.71;  // m/s^2

  static GravityEnv mars() { return {3.71}; }
  static GravityEnv moon() { return {1.62}; }
  static GravityEnv earth() { return {9.81}; }

  bool valid() const { return g > 0.0; }
};

enum class JumpPhase { Standing, Squatting, InFlight, PreTouchdown };

inline constexpr double kSqrt1_2 = 0.70710678118654752440;

// Ballistic apogee from current height and vertical velocity.
inline double estimate_apogee(double p_z, double v_z, const GravityEnv& env) {
  const double up = std::max(0.0, v_z);
  return p_z + up * up / (2.0 * env.g);
}

struct LandingEstimate {
  Eigen::Vector2d xy;
  double time_to_land;
};

// Closed-form descending intersection of the ballistic arc with ground_z.
inline LandingEstimate estimate_landing_point(const Eigen::Vector3d& p, const Eigen::Vector3d& v,
                                              double ground_z, const GravityEnv& env) {
  const double disc = v.z() * v.z() + 2.0 * env.g * (p.z() - ground_z);
  if (disc < 0.0) {
    throw NeverLands("apogee below ground level");
  }
  const double t = (v.z() + std::sqrt(disc)) / env.g;
  if (t < 0.0) {
    throw NeverLands("ground plane was crossed in the past");
  }
  return {p.head<2>() + v.head<2>() * t, t};
}

struct RsiConfig {
  double vertical_range_min = 1.8;   // m, curriculum target heights
  double vertical_range_max = 2.8;
  double forward_range_min = 1.5;    // m, curriculum target distances
  double forward_range_max = 4.1;
  double takeoff_speed_cap = 8.0;    // m/s
  double pre_touchdown_window = 0.15;  // s
  double squat_angle = deg2rad(80.0);  // transversal pose while squatting
  double attitude_perturbation = deg2rad(5.0);  // in-flight RSI attitude noise
  bool vertical = true;  // sample vertical (true) or forward (false) maneuvers
};

namespace detail {

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

inline double gaussian(std::mt19937_64& rng) {
  // Box-Muller; avoids the implementation-defined std distributions.
  const double u1 = std::max(uniform01(rng), 1e-300);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

inline Quaternion random_unit_quaternion(std::mt19937_64& rng) {
  Quaternion q(gaussian(rng), gaussian(rng), gaussian(rng), gaussian(rng));
  q.normalize();
  return q;
}

inline Quaternion perturbed_identity(std::mt19937_64& rng, double sigma) {
  Eigen::Vector3d rot(gaussian(rng), gaussian(rng), gaussian(rng));
  rot *= sigma;
  const double n = rot.norm();
  if (n < 1e-12) return Quaternion::Identity();
  return Quaternion(Eigen::AngleAxisd(n, rot / n));
}

}  // namespace detail

// Reference-state sampling across jump phases. In-flight and pre-touchdown
// states lie on the projectile arc that reaches the commanded target.
// Deterministic for a given seed.
inline RobotState rsi_sample(JumpPhase phase, const CommandState& target, const GravityEnv& env,
                             std::uint64_t rng_seed, const RsiConfig& cfg,
                             const LegGeometry& geom) {
  std::mt19937_64 rng(rng_seed);
  const double h0 = stance_height(geom);
  RobotState s;
  s.position = Eigen::Vector3d(0.0, 0.0, h0);

  if (phase == JumpPhase::Standing) {
    for (int i = 0; i < 4; ++i) s.foot_contacts[i] = true;
    return s;
  }
  if (phase == JumpPhase::Squatting) {
    for (int leg = 0; leg < kNumLegs; ++leg) {
      s.joints[joint_index(leg, JointRole::InnerTransversal)] = cfg.squat_angle;
      s.joints[joint_index(leg, JointRole::OuterTransversal)] = cfg.squat_angle;
    }
    const LegJointAngles a{0.0, cfg.squat_angle, cfg.squat_angle};
    s.position.z() = -forward_kinematics(a, geom).foot.y();
    for (int i = 0; i < 4; ++i) s.foot_contacts[i] = true;
    return s;
  }

  // Launch state at the stance height that reaches the commanded target.
  Eigen::Vector3d v0;
  if (cfg.vertical) {
    const double rise = target.target_height - h0;
    if (rise <= 0.0) throw InfeasibleTarget("target apogee below stance height");
    const double vz = std::sqrt(2.0 * env.g * rise);
    if (vz > cfg.takeoff_speed_cap) throw InfeasibleTarget("required takeoff speed exceeds cap");
    v0 = Eigen::Vector3d(0.0, 0.0, vz);
  } else {
    const Eigen::Vector2d delta = target.target_landing_xy;
    const double dist = delta.norm();
    const double dz = target.target_ground_z;  // landing ground height change
    if (dist <= dz) throw InfeasibleTarget("forward target not reachable at 45 deg launch");
    const double v2 = env.g * dist * dist / (dist - dz);
    const double v = std::sqrt(v2);
    if (v > cfg.takeoff_speed_cap) throw InfeasibleTarget("required takeoff speed exceeds cap");
    const Eigen::Vector2d dir = dist > 1e-12 ? (delta / dist).eval() : Eigen::Vector2d(1.0, 0.0);
    v0 = Eigen::Vector3d(v * kSqrt1_2 * dir.x(), v * kSqrt1_2 * dir.y(), v * kSqrt1_2);
  }

  const Eigen::Vector3d p0(0.0, 0.0, h0);
  const double ground_z = cfg.vertical ? 0.0 : target.target_ground_z;
  const double t_land = estimate_landing_point(p0, v0, ground_z + h0, env).time_to_land;

  double t;
  if (phase == JumpPhase::InFlight) {
    t = detail::uniform(rng, 0.0, t_land);
  } else {  // PreTouchdown
    t = detail::uniform(rng, std::max(0.0, t_land - cfg.pre_touchdown_window), t_land);
  }
  s.position = p0 + v0 * t - 0.5 * env.g * t * t * Eigen::Vector3d::UnitZ();
  s.velocity = v0 - env.g * t * Eigen::Vector3d::UnitZ();
  s.orientation = detail::perturbed_identity(rng, cfg.attitude_perturbation);
  return s;
}

// Attitude-training initialization: uniformly random orientation, joints
// across the full feasible range, and zero total angular momentum under the
// lumped reaction-mass model.
inline RobotState rsi_sample_attitude(std::uint64_t rng_seed, const LegGeometry& geom,
                                      const BodyGeometry& body) {
  std::mt19937_64 rng(rng_seed);
  RobotState s;
  s.position = Eigen::Vector3d(0.0, 0.0, 10.0);
  s.orientation = detail::random_unit_quaternion(rng);

  for (int leg = 0; leg < kNumLegs; ++leg) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      LegJointAngles a;
      a.theta_lateral = detail::uniform(rng, geom.joint_limits_lower[0], geom.joint_limits_upper[0]);
      a.theta_inner_transversal =
          detail::uniform(rng, geom.joint_limits_lower[1], geom.joint_limits_upper[1]);
      a.theta_outer_transversal =
          detail::uniform(rng, geom.joint_limits_lower[2], geom.joint_limits_upper[2]);
      if (coupling_violation(a, geom) != 0.0) continue;
      s.joints[joint_index(leg, JointRole::Lateral)] = a.theta_lateral;
      s.joints[joint_index(leg, JointRole::InnerTransversal)] = a.theta_inner_transversal;
      s.joints[joint_index(leg, JointRole::OuterTransversal)] = a.theta_outer_transversal;
      break;
    }
  }
  for (int j = 0; j < kNumJoints; ++j) {
    s.joint_velocities[j] = detail::uniform(rng, -2.0, 2.0);
  }
  // Body rate chosen so total angular momentum is exactly zero.
  s.omega_body =
      -body.body_inertia.inverse() * (leg_momentum_matrix(body) * s.joint_velocities);
  return s;
}

}  // namespace lowg
