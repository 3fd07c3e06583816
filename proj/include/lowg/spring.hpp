#pragma once

#include <cmath>

#include "lowg/geometry.hpp"
#include "lowg/types.hpp"

namespace lowg {

// Parallel extension spring acting across the knee-to-knee distance. Stage
// one (theta_combined below stage_boundary) maps the spring force to the two
// transversal joints through the knee-distance Jacobian transpose. In deep
// compression (stage two) the cord wraps the motor axles: the effective cord
// length extrapolates from the boundary distance at the current asymmetry,
// growing with a moment arm that ramps from the calibrated stage-one
// boundary value up to pulley_radius over wrap_window rad of combined
// angle. Torque is the exact gradient of the resulting continuous cord
// length scaled by the spring force, so the element is conservative and the
// two branches agree at the boundary for symmetric squats.
struct SpringParams {
  double k = 800.0;                        // N/m
  double rest_length = 0.33748737341529156;  // m, knee distance at the 45/45 stance
  double stage_boundary = kPi;             // rad, theta_combined = 180 deg
  double pulley_radius = 0.02;             // m, fully wrapped moment arm
  double wrap_window = deg2rad(20.0);      // rad of combined angle to full wrap
  bool enabled = true;

  bool valid() const {
    return k >= 0 && rest_length > 0 && pulley_radius > 0 && wrap_window > 0;
  }
};

inline double spring_force(double knee_dist, const SpringParams& p) {
  if (!p.enabled) return 0.0;
  return p.k * std::max(0.0, knee_dist - p.rest_length);
}

// Default rest length: the knee distance at the theta_it = theta_ot = 45 deg
// stance, so the spring is slack when standing.
inline SpringParams default_spring_params(const LegGeometry& g) {
  SpringParams p;
  const double half = deg2rad(45.0);
  p.rest_length = knee_distance({0.0, half, half}, g);
  return p;
}

namespace detail {

// Stage-one per-joint moment arm at the symmetric boundary squat; zero for
// l1 == l2 geometries, where the knee distance peaks at the boundary.
inline double boundary_arm(const LegGeometry& g, const SpringParams& p) {
  const double half = p.stage_boundary / 2.0;
  return knee_distance_jacobian({0.0, half, half}, g).x();
}

// Boundary configuration at the same inner/outer asymmetry as the query.
inline LegJointAngles boundary_config(const LegJointAngles& a, const SpringParams& p) {
  const double asym = a.theta_inner_transversal - a.theta_outer_transversal;
  return {a.theta_lateral, (p.stage_boundary + asym) / 2.0, (p.stage_boundary - asym) / 2.0};
}

// Wrap moment arm as a function of combined angle past the boundary.
inline double wrap_arm(double past, double r0, const SpringParams& p) {
  const double f = std::min(1.0, past / p.wrap_window);
  return r0 + (p.pulley_radius - r0) * f;
}

// Integral of wrap_arm from 0 to past: the extra cord length from wrapping.
inline double wrap_length(double past, double r0, const SpringParams& p) {
  const double dr = p.pulley_radius - r0;
  if (past <= p.wrap_window) {
    return r0 * past + dr * past * past / (2.0 * p.wrap_window);
  }
  return r0 * past + dr * (p.wrap_window / 2.0 + (past - p.wrap_window));
}

}  // namespace detail

// Effective cord extension length, well-defined past the geometric closure
// optimum: stage two extrapolates from the boundary distance at the current
// asymmetry by the wrapped arc length. Continuous everywhere.
inline double spring_cord_length(const LegJointAngles& a, const LegGeometry& g,
                                 const SpringParams& p) {
  const double combined = a.theta_inner_transversal + a.theta_outer_transversal;
  if (combined <= p.stage_boundary) return knee_distance(a, g);
  const double r0 = detail::boundary_arm(g, p);
  return knee_distance(detail::boundary_config(a, p), g) +
         detail::wrap_length(combined - p.stage_boundary, r0, p);
}

// Spring torque on (theta_it, theta_ot): tau = -F * dL/dtheta per joint,
// the exact gradient of the cord-length potential.
inline Eigen::Vector2d spring_torque(const LegJointAngles& a, const LegGeometry& g,
                                     const SpringParams& p) {
  if (!p.enabled || p.k == 0.0) return Eigen::Vector2d::Zero();
  const double combined = a.theta_inner_transversal + a.theta_outer_transversal;
  if (combined <= p.stage_boundary) {
    const double f = spring_force(knee_distance(a, g), p);
    if (f == 0.0) return Eigen::Vector2d::Zero();
    return -f * knee_distance_jacobian(a, g);
  }
  const double r0 = detail::boundary_arm(g, p);
  const LegJointAngles at_boundary = detail::boundary_config(a, p);
  const double len = knee_distance(at_boundary, g) +
                     detail::wrap_length(combined - p.stage_boundary, r0, p);
  const double f = spring_force(len, p);
  if (f == 0.0) return Eigen::Vector2d::Zero();
  const double arm = detail::wrap_arm(combined - p.stage_boundary, r0, p);
  // d(boundary distance)/d(asymmetry), chain-ruled through the half-split.
  const Eigen::Vector2d jb = knee_distance_jacobian(at_boundary, g);
  const double da = (jb.x() - jb.y()) / 2.0;
  return Eigen::Vector2d(-f * (arm + da), -f * (arm - da));
}

// Spring torques for all 12 joints (lateral entries are zero).
inline JointVector spring_torques(const JointVector& q, const LegGeometry& g,
                                  const SpringParams& p) {
  JointVector tau = JointVector::Zero();
  if (!p.enabled || p.k == 0.0) return tau;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Eigen::Vector2d t = spring_torque(leg_angles(q, leg), g, p);
    tau[joint_index(leg, JointRole::InnerTransversal)] = t.x();
    tau[joint_index(leg, JointRole::OuterTransversal)] = t.y();
  }
  return tau;
}

inline JointVector total_torque(const JointVector& tau_motor, const JointVector& tau_spring) {
  return tau_motor + tau_spring;
}

}  // namespace lowg
