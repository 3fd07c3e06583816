#pragma once

#include <cmath>

#include "lowg/types.hpp"

namespace lowg {

// 5-bar leg geometry. The sagittal leg plane uses x along the hip baseline
// (inner hip at -l0/2, outer hip at +l0/2) and z up, so the foot hangs at
// negative z. Transversal angles are measured from the straight-down
// direction, positive folding the knee outward/up toward the body.
// The knee-out elbow branch is used throughout: knees spread apart and the
// foot takes the lower of the two circle intersections.
struct LegGeometry {
  double l0 = 0.09;
  double l1 = 0.175;
  double l2 = 0.175;
  double l3 = 0.3;
  double l4 = 0.3;
  // Per-role limits: [lateral, inner transversal, outer transversal].
  Eigen::Vector3d joint_limits_lower{deg2rad(-90.0), deg2rad(-40.0), deg2rad(-40.0)};
  Eigen::Vector3d joint_limits_upper{deg2rad(90.0), deg2rad(130.0), deg2rad(130.0)};
  double coupling_lower = 0.0;                // theta_l, rad
  double coupling_upper = deg2rad(240.0);     // theta_u, rad

  bool valid() const {
    return l0 > 0 && l1 > 0 && l2 > 0 && l3 > 0 && l4 > 0 &&
           (joint_limits_lower.array() < joint_limits_upper.array()).all() &&
           coupling_lower < coupling_upper;
  }

  double limit_lower(int joint) const { return joint_limits_lower[joint % kJointsPerLeg]; }
  double limit_upper(int joint) const { return joint_limits_upper[joint % kJointsPerLeg]; }
};

struct BodyGeometry {
  double l_body = 0.6;     // front-back leg distance
  double w_body_f = 0.21;  // front leg separation
  double w_body_b = 0.3;   // back leg separation
  double mass = 14.5;
  // Placeholder inertias for the reduced-order model. The body tensor and the
  // per-joint lumped leg inertia are sized so the reaction-mass attitude
  // model has authority for large reorientations; they are config, not
  // identified values.
  Eigen::Matrix3d body_inertia =
      Eigen::Vector3d(0.12, 0.30, 0.12).asDiagonal().toDenseMatrix();
  double leg_lumped_inertia = 0.12;  // kg m^2 per joint about its hip axis
  // Offset of the 5-bar hip pair within each leg mount frame (x forward, z up).
  Eigen::Vector3d fivebar_offset = Eigen::Vector3d::Zero();

  bool valid() const {
    return mass > 0 && body_inertia.isApprox(body_inertia.transpose(), 1e-12) &&
           body_inertia.llt().info() == Eigen::Success;
  }

  // Leg mount position in the body frame (x forward, y left, z up).
  Eigen::Vector3d leg_mount(int leg) const {
    const double x = (leg == 0 || leg == 1) ? l_body / 2.0 : -l_body / 2.0;
    const double w = (leg == 0 || leg == 1) ? w_body_f : w_body_b;
    const double y = (leg == 0 || leg == 2) ? w / 2.0 : -w / 2.0;
    return Eigen::Vector3d(x, y, 0.0) + fivebar_offset;
  }
};

struct LegJointAngles {
  double theta_lateral = 0.0;
  double theta_inner_transversal = 0.0;
  double theta_outer_transversal = 0.0;
};

inline LegJointAngles leg_angles(const JointVector& q, int leg) {
  return {q[joint_index(leg, JointRole::Lateral)],
          q[joint_index(leg, JointRole::InnerTransversal)],
          q[joint_index(leg, JointRole::OuterTransversal)]};
}

struct FootSolution {
  Eigen::Vector2d foot;        // leg sagittal plane, m
  Eigen::Vector2d knee_inner;  // end of the l1 chain
  Eigen::Vector2d knee_outer;  // end of the l2 chain
};

namespace detail {

inline Eigen::Vector2d knee_inner_pos(const LegJointAngles& a, const LegGeometry& g) {
  return {-g.l0 / 2.0 - g.l1 * std::sin(a.theta_inner_transversal),
          -g.l1 * std::cos(a.theta_inner_transversal)};
}

inline Eigen::Vector2d knee_outer_pos(const LegJointAngles& a, const LegGeometry& g) {
  return {g.l0 / 2.0 + g.l2 * std::sin(a.theta_outer_transversal),
          -g.l2 * std::cos(a.theta_outer_transversal)};
}

}  // namespace detail

inline double knee_distance(const LegJointAngles& a, const LegGeometry& g) {
  return (detail::knee_outer_pos(a, g) - detail::knee_inner_pos(a, g)).norm();
}

inline FootSolution forward_kinematics(const LegJointAngles& a, const LegGeometry& g) {
  const Eigen::Vector2d ki = detail::knee_inner_pos(a, g);
  const Eigen::Vector2d ko = detail::knee_outer_pos(a, g);
  const Eigen::Vector2d delta = ko - ki;
  const double d = delta.norm();
  if (d > g.l3 + g.l4 || d < std::abs(g.l3 - g.l4) || d < 1e-12) {
    throw ClosureUnreachable("lower links cannot intersect: knee gap " + std::to_string(d));
  }
  // Two-circle intersection, radius l3 about the inner knee, l4 about the outer.
  const double along = (g.l3 * g.l3 - g.l4 * g.l4 + d * d) / (2.0 * d);
  const double h2 = g.l3 * g.l3 - along * along;
  const double h = std::sqrt(std::max(0.0, h2));
  const Eigen::Vector2d u = delta / d;
  const Eigen::Vector2d mid = ki + along * u;
  const Eigen::Vector2d perp(-u.y(), u.x());
  const Eigen::Vector2d pa = mid + h * perp;
  const Eigen::Vector2d pb = mid - h * perp;
  return {pa.y() < pb.y() ? pa : pb, ki, ko};
}

// Gradient of the knee-to-knee distance w.r.t. (theta_it, theta_ot), m/rad.
// Used as the Jacobian-transpose map from spring force to joint torques.
inline Eigen::Vector2d knee_distance_jacobian(const LegJointAngles& a, const LegGeometry& g) {
  const Eigen::Vector2d ki = detail::knee_inner_pos(a, g);
  const Eigen::Vector2d ko = detail::knee_outer_pos(a, g);
  const Eigen::Vector2d delta = ko - ki;
  const double d = delta.norm();
  if (d > g.l3 + g.l4 + 1e-9 || d < std::abs(g.l3 - g.l4) - 1e-9 || d < 1e-12) {
    throw ClosureUnreachable("lower links cannot intersect: knee gap " + std::to_string(d));
  }
  const double along = (g.l3 * g.l3 - g.l4 * g.l4 + d * d) / (2.0 * d);
  const double h2 = g.l3 * g.l3 - along * along;
  if (h2 < 1e-12 * g.l3 * g.l3) {
    throw SingularConfiguration("lower links collinear");
  }
  const double ti = a.theta_inner_transversal;
  const double to = a.theta_outer_transversal;
  const double ddti = g.l1 * (delta.x() * std::cos(ti) - delta.y() * std::sin(ti)) / d;
  const double ddto = g.l2 * (delta.x() * std::cos(to) + delta.y() * std::sin(to)) / d;
  return {ddti, ddto};
}

// 0 when theta_l <= theta_it + theta_ot <= theta_u, otherwise the signed
// distance to the nearest violated bound.
inline double coupling_violation(const LegJointAngles& a, const LegGeometry& g) {
  const double s = a.theta_inner_transversal + a.theta_outer_transversal;
  if (s > g.coupling_upper) return s - g.coupling_upper;
  if (s < g.coupling_lower) return s - g.coupling_lower;
  return 0.0;
}

}  // namespace lowg
