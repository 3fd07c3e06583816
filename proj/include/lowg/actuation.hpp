#pragma once

#include <algorithm>
#include <cmath>

#include "lowg/geometry.hpp"
#include "lowg/types.hpp"

namespace lowg {

struct MotorParams {
  double tau_max = 24.8;           // N m at zero speed
  double theta_dot_cut = 22.0;     // rad/s, full torque below this
  double theta_dot_no_load = 30.0; // rad/s, zero torque at or above this
  double kp = 60.0;                // N m / rad
  double kd = 1.5;                 // N m s / rad

  bool valid() const {
    return tau_max > 0 && kp >= 0 && kd >= 0 &&
           theta_dot_cut > 0 && theta_dot_cut < theta_dot_no_load;
  }
};

// Motor parameter set per joint group. Speed defaults are placeholders
// (cut = 0.75 * no-load); the torque ratings are the AK80-9 / AK70-10 values.
struct ActuatorConfig {
  MotorParams lateral{18.0, 22.0, 30.0, 60.0, 1.5};
  MotorParams transversal{24.8, 22.0, 30.0, 60.0, 1.5};
  // Conservative no-load speed option used for attitude work.
  double attitude_no_load_scale = 1.0;
  double theta_dot_safe = 10.0;  // rad/s, braking constraint threshold

  MotorParams params_for(int joint) const {
    return is_lateral(joint) ? lateral : transversal;
  }
};

enum class TaskKind { Walking, AttitudeControl, VerticalJump, ForwardJump };

inline double pd_torque(double theta_target, double theta, double theta_dot,
                        const MotorParams& p) {
  return p.kp * (theta_target - theta) - p.kd * theta_dot;
}

// Zero-order torque-speed envelope: full torque below the cutoff speed,
// linear falloff to zero at the no-load speed.
inline double torque_speed_limit(double theta_dot, const MotorParams& p) {
  const double w = std::abs(theta_dot);
  if (w <= p.theta_dot_cut) return p.tau_max;
  if (w >= p.theta_dot_no_load) return 0.0;
  return p.tau_max * (1.0 - (w - p.theta_dot_cut) / (p.theta_dot_no_load - p.theta_dot_cut));
}

inline double saturate_torque(double tau_desired, double theta_dot, const MotorParams& p) {
  const double lim = torque_speed_limit(theta_dot, p);
  return std::clamp(tau_desired, -lim, lim);
}

// Above the safe speed only dissipative torque (opposing the motion) passes.
inline double apply_braking_constraint(double tau, double theta_dot, double theta_dot_safe) {
  if (std::abs(theta_dot) <= theta_dot_safe) return tau;
  return tau * theta_dot < 0.0 ? tau : 0.0;
}

inline double task_torque_limit(TaskKind task, const MotorParams& p) {
  switch (task) {
    case TaskKind::Walking: return 10.0;
    case TaskKind::AttitudeControl: return 12.0;
    default: return p.tau_max;  // jumping uses the full motor torque
  }
}

inline double task_torque_cap(double tau, TaskKind task, const MotorParams& p) {
  const double lim = task_torque_limit(task, p);
  return std::clamp(tau, -lim, lim);
}

namespace detail {

// Euclidean projection of (a, b) onto the segment {x + y = sum, x and y in
// their boxes}. Exact, hence idempotent.
inline void project_to_sum(double& a, double& b, double sum,
                           double lo_a, double hi_a, double lo_b, double hi_b) {
  const double x_lo = std::max(lo_a, sum - hi_b);
  const double x_hi = std::min(hi_a, sum - lo_b);
  double x = (a - b + sum) / 2.0;
  x = std::clamp(x, x_lo, x_hi);
  a = x;
  b = sum - x;
}

}  // namespace detail

// Projects joint targets onto the feasible set: box limits per joint, then
// the transversal coupling theta_l <= theta_it + theta_ot <= theta_u with an
// equal-split reduction, then a re-clamp along the coupling face. Feasible
// inputs pass through unchanged and the filter is idempotent.
inline JointVector safety_filter(const JointVector& theta_target, const LegGeometry& geom) {
  JointVector out = theta_target;
  for (int j = 0; j < kNumJoints; ++j) {
    out[j] = std::clamp(out[j], geom.limit_lower(j), geom.limit_upper(j));
  }
  const double lo_i = geom.joint_limits_lower[1];
  const double hi_i = geom.joint_limits_upper[1];
  const double lo_o = geom.joint_limits_lower[2];
  const double hi_o = geom.joint_limits_upper[2];
  for (int leg = 0; leg < kNumLegs; ++leg) {
    double& ti = out[joint_index(leg, JointRole::InnerTransversal)];
    double& to = out[joint_index(leg, JointRole::OuterTransversal)];
    const double s = ti + to;
    if (s > geom.coupling_upper) {
      detail::project_to_sum(ti, to, geom.coupling_upper, lo_i, hi_i, lo_o, hi_o);
    } else if (s < geom.coupling_lower) {
      detail::project_to_sum(ti, to, geom.coupling_lower, lo_i, hi_i, lo_o, hi_o);
    }
  }
  return out;
}

// Full torque pipeline for one joint: PD -> task cap -> (attitude only)
// braking constraint -> torque-speed saturation.
inline double motor_torque(double theta_target, double theta, double theta_dot,
                           TaskKind task, const MotorParams& p, double theta_dot_safe) {
  double tau = pd_torque(theta_target, theta, theta_dot, p);
  tau = task_torque_cap(tau, task, p);
  if (task == TaskKind::AttitudeControl) {
    tau = apply_braking_constraint(tau, theta_dot, theta_dot_safe);
  }
  return saturate_torque(tau, theta_dot, p);
}

inline JointVector motor_torques(const JointVector& theta_target, const JointVector& theta,
                                 const JointVector& theta_dot, TaskKind task,
                                 const ActuatorConfig& cfg) {
  JointVector tau;
  for (int j = 0; j < kNumJoints; ++j) {
    tau[j] = motor_torque(theta_target[j], theta[j], theta_dot[j], task,
                          cfg.params_for(j), cfg.theta_dot_safe);
  }
  return tau;
}

}  // namespace lowg
