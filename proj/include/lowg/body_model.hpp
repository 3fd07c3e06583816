#pragma once

#include <cmath>

#include "lowg/geometry.hpp"
#include "lowg/state.hpp"

namespace lowg {

// Reduced-order reaction-mass model: the body is a single rigid body and
// each joint carries a lumped rotary inertia about a fixed body-frame axis.
// Transversal joints react about the pitch axis. Lateral joint axes are
// canted in the x-z plane with a per-leg diagonal sign, so coordinated
// lateral swings exert roll (common mode) or yaw (differential mode)
// reactions. Positive lateral angle abducts the leg outward on both sides.

inline constexpr double kLateralAxisCant = kPi / 4.0;  // 45 deg

inline double lateral_abduction_sign(int leg) {
  // +1 left legs (FL, BL), -1 right legs
  return (leg == 0 || leg == 2) ? 1.0 : -1.0;
}

inline double lateral_yaw_sign(int leg) {
  // diagonal pairing: FL, BR positive
  return (leg == 0 || leg == 3) ? 1.0 : -1.0;
}

// Per-joint rotation axis of the lumped leg inertia, body frame, oriented so
// positive joint rate gives angular momentum along the axis. The inner and
// outer transversal conventions are mirrored about straight-down, so a
// symmetric squat or extension (equal inner/outer rates) carries zero net
// momentum, while fore-aft knee sweeps (opposed rates) exert pitch. Lateral
// axes carry the left/right abduction sign and are canted toward yaw with a
// diagonal sign so coordinated swings exert roll or yaw.
inline Eigen::Vector3d joint_axis(int joint) {
  const int leg = joint / kJointsPerLeg;
  switch (static_cast<JointRole>(joint % kJointsPerLeg)) {
    case JointRole::Lateral:
      return Eigen::Vector3d(lateral_abduction_sign(leg) * std::cos(kLateralAxisCant), 0.0,
                             lateral_yaw_sign(leg) * std::sin(kLateralAxisCant));
    case JointRole::InnerTransversal:
      return Eigen::Vector3d::UnitY();
    default:
      return -Eigen::Vector3d::UnitY();
  }
}

// 3x12 map from joint rates to lumped leg angular momentum (body frame).
inline Eigen::Matrix<double, 3, 12> leg_momentum_matrix(const BodyGeometry& body) {
  Eigen::Matrix<double, 3, 12> a;
  for (int j = 0; j < kNumJoints; ++j) {
    a.col(j) = body.leg_lumped_inertia * joint_axis(j);
  }
  return a;
}

// Total angular momentum about the body origin, expressed in the body frame.
inline Eigen::Vector3d angular_momentum_body(const RobotState& s, const BodyGeometry& body) {
  return body.body_inertia * s.omega_body + leg_momentum_matrix(body) * s.joint_velocities;
}

inline Eigen::Vector3d angular_momentum_world(const RobotState& s, const BodyGeometry& body) {
  return s.orientation * angular_momentum_body(s, body);
}

// Foot position in the body frame: the 5-bar sagittal plane (x forward,
// z up) rotated about body x by the lateral angle.
inline Eigen::Vector3d foot_position_body(int leg, const JointVector& q,
                                          const LegGeometry& geom, const BodyGeometry& body) {
  const LegJointAngles a = leg_angles(q, leg);
  const FootSolution fk = forward_kinematics(a, geom);
  const Eigen::Vector3d in_plane(fk.foot.x(), 0.0, fk.foot.y());
  const double roll = lateral_abduction_sign(leg) * a.theta_lateral;
  const Eigen::AngleAxisd tilt(roll, Eigen::Vector3d::UnitX());
  return body.leg_mount(leg) + tilt * in_plane;
}

inline Eigen::Vector3d foot_position_world(int leg, const RobotState& s,
                                           const LegGeometry& geom, const BodyGeometry& body) {
  return s.position + s.orientation * foot_position_body(leg, s.joints, geom, body);
}

// Body height above flat ground when standing at the default pose.
inline double stance_height(const LegGeometry& geom) {
  const double half = deg2rad(45.0);
  return -forward_kinematics({0.0, half, half}, geom).foot.y();
}

}  // namespace lowg
