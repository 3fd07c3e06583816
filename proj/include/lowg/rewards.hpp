#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "lowg/ballistics.hpp"
#include "lowg/state.hpp"
#include "lowg/types.hpp"

namespace lowg {

// Gaussian kernel phi_sigma(x) = exp(-x^2 / sigma^2).
inline double kernel_phi(double x, double sigma) { return std::exp(-x * x / (sigma * sigma)); }

// Laplacian kernel psi_sigma(x) = exp(-|x| / sigma).
inline double kernel_psi(double x, double sigma) { return std::exp(-std::abs(x) / sigma); }

// Kernel widths and weights. Sigma values and weights are config; the
// defaults here are working values, not identified ones.
struct RewardConfig {
  std::array<double, 25> sigma{};  // sigma[1] .. sigma[24]
  std::map<std::string, double> weights;
  double angle_gate = deg2rad(5.0);  // angular-velocity reward disable gate
  double a_body_max = 50.0;          // m/s^2, soft-impact normalization
  bool swap_walking_pos_rows = false;

  RewardConfig() {
    sigma.fill(1.0);
    sigma[1] = 0.1;   // quaternion error, fine
    sigma[2] = 0.8;   // quaternion error, coarse
    sigma[3] = 0.5;
    sigma[4] = 1.0;
    sigma[5] = 0.5;
    sigma[6] = 0.5;
    sigma[7] = 0.25;
    sigma[8] = 0.5;
    sigma[9] = 0.5;
    sigma[10] = 0.5;
    sigma[11] = 0.5;
    sigma[12] = 0.4;
    sigma[13] = 0.4;
    sigma[14] = 0.4;
    sigma[15] = 0.4;
    sigma[16] = 0.3;
    sigma[17] = 0.5;
    sigma[18] = 0.5;
    sigma[19] = 0.5;
    sigma[20] = 1.0;
    sigma[21] = 0.5;
    sigma[22] = 2.0;
    sigma[23] = 1.0;
    sigma[24] = 0.3;
  }

  double weight(const std::string& name) const {
    const auto it = weights.find(name);
    return it == weights.end() ? 1.0 : it->second;
  }
};

struct RewardTerm {
  std::string name;
  double raw = 0.0;
  double weighted = 0.0;
};

// Named per-term values; total is the sum of weighted values.
struct RewardBreakdown {
  std::vector<RewardTerm> terms;

  void add(const std::string& name, double raw, const RewardConfig& cfg) {
    terms.push_back({name, raw, raw * cfg.weight(name)});
  }
  double total() const {
    double t = 0.0;
    for (const auto& term : terms) t += term.weighted;
    return t;
  }
  double raw(const std::string& name) const {
    for (const auto& term : terms)
      if (term.name == name) return term.raw;
    throw std::out_of_range("no reward term named " + name);
  }
};

namespace reward_detail {

inline Eigen::Vector4d lateral_angles(const JointVector& q) {
  return {q[0], q[3], q[6], q[9]};
}

inline Eigen::Matrix<double, 8, 1> transversal_angles(const JointVector& q) {
  Eigen::Matrix<double, 8, 1> t;
  int k = 0;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    t[k++] = q[joint_index(leg, JointRole::InnerTransversal)];
    t[k++] = q[joint_index(leg, JointRole::OuterTransversal)];
  }
  return t;
}

inline Eigen::Vector4d inner_transversal(const JointVector& q) {
  return {q[1], q[4], q[7], q[10]};
}

inline Eigen::Vector4d outer_transversal(const JointVector& q) {
  return {q[2], q[5], q[8], q[11]};
}

// Population variance.
inline double variance(const Eigen::Matrix<double, 8, 1>& v) {
  const double mean = v.mean();
  return (v.array() - mean).square().mean();
}

// Gravity direction in the body frame, unit length; xy part measures tilt.
inline Eigen::Vector2d projected_gravity_xy(const RobotState& s) {
  const Eigen::Vector3d g_body = s.orientation.conjugate() * Eigen::Vector3d(0, 0, -1);
  return g_body.head<2>();
}

}  // namespace reward_detail

// Attitude control terms. Quaternion kernels take the rotation angle of the
// body-to-reference error in radians. The angular-velocity reward is gated
// off below the 5 degree error angle, and the landing/stability terms scale
// with the narrow-kernel activation r_q1.
inline RewardBreakdown attitude_rewards(const RobotState& s, const CommandState& cmd,
                                        const RewardConfig& cfg) {
  RewardBreakdown out;
  const QuaternionError qe = quaternion_error(s.orientation, cmd.reference_orientation);
  const double r_q1 = kernel_phi(qe.angle, cfg.sigma[1]);

  out.add("quat_error", r_q1 + 0.6 * kernel_phi(qe.angle, cfg.sigma[2]), cfg);
  out.add("body_ang_vel", qe.angle >= cfg.angle_gate ? s.omega_body.dot(qe.axis) : 0.0, cfg);
  out.add("stability", kernel_phi(s.omega_body.squaredNorm(), cfg.sigma[3]) * r_q1, cfg);

  const JointVector def = default_joint_pose();
  const Eigen::Vector4d dl =
      reward_detail::lateral_angles(s.joints) - reward_detail::lateral_angles(def);
  const Eigen::Matrix<double, 8, 1> dt =
      reward_detail::transversal_angles(s.joints) - reward_detail::transversal_angles(def);
  out.add("landing_lateral", kernel_phi(dl.norm(), cfg.sigma[3]) * r_q1, cfg);
  out.add("landing_transversal", kernel_phi(dt.squaredNorm(), cfg.sigma[4]) * r_q1, cfg);

  const double lat_sym = std::abs(s.joints[6] - s.joints[0]) + std::abs(s.joints[9] - s.joints[3]);
  out.add("symmetry_lateral", kernel_phi(lat_sym, cfg.sigma[5]), cfg);
  const Eigen::Vector4d tsym =
      reward_detail::inner_transversal(s.joints) - reward_detail::outer_transversal(s.joints);
  out.add("symmetry_transversal", kernel_phi(tsym.norm(), cfg.sigma[6]), cfg);
  return out;
}

inline RewardBreakdown walking_rewards(const RobotState& s, const CommandState& cmd,
                                       const RewardConfig& cfg) {
  RewardBreakdown out;
  out.add("lin_vel_error",
          kernel_phi((s.velocity.head<2>() - cmd.commanded_velocity_xy).norm(), cfg.sigma[7]), cfg);
  out.add("yaw_rate", kernel_phi(s.omega_body.z() - cmd.yaw_rate, cfg.sigma[8]), cfg);
  out.add("vertical_vel", s.velocity.z() * s.velocity.z(), cfg);
  out.add("lateral_stability", s.omega_body.head<2>().squaredNorm(), cfg);
  out.add("flat", reward_detail::projected_gravity_xy(s).squaredNorm(), cfg);

  const Eigen::Matrix<double, 8, 1> et = reward_detail::transversal_angles(s.joints) -
                                         reward_detail::transversal_angles(cmd.joint_targets);
  const Eigen::Vector4d el = reward_detail::lateral_angles(s.joints) -
                             reward_detail::lateral_angles(cmd.joint_targets);
  out.add("stand", kernel_phi(et.norm(), cfg.sigma[9]), cfg);
  // Row names and symbols as printed; the swap flag exchanges the joint
  // groups of the two position rows.
  const double arg10 = cfg.swap_walking_pos_rows ? el.norm() : et.norm();
  const double arg11 = cfg.swap_walking_pos_rows ? et.norm() : el.norm();
  out.add("lateral_pos", kernel_phi(std::pow(arg10, 4.0), cfg.sigma[10]), cfg);
  out.add("transversal_pos", kernel_phi(std::pow(arg11, 10.0), cfg.sigma[11]), cfg);
  return out;
}

inline RewardBreakdown vertical_jump_rewards(const RobotState& s, const CommandState& cmd,
                                             const RewardConfig& cfg, const EpisodeStats& stats,
                                             const GravityEnv& env) {
  RewardBreakdown out;
  const double he = stats.max_height - cmd.target_height;
  out.add("height", kernel_phi(he, cfg.sigma[12]) + 3.0 * kernel_psi(he, cfg.sigma[13]), cfg);
  const double est = estimate_apogee(s.position.z(), s.velocity.z(), env);
  const double ee = est - cmd.target_height;
  out.add("est_height", kernel_phi(ee, cfg.sigma[14]) + 3.0 * kernel_psi(ee, cfg.sigma[15]), cfg);
  const double var_t = reward_detail::variance(reward_detail::transversal_angles(s.joints));
  const double lat_norm = reward_detail::lateral_angles(s.joints).norm();
  out.add("symmetry",
          kernel_phi(var_t, cfg.sigma[16]) + kernel_phi(lat_norm, cfg.sigma[17]), cfg);
  return out;
}

inline RewardBreakdown forward_jump_rewards(const RobotState& s, const CommandState& cmd,
                                            const RewardConfig& cfg, const GravityEnv& env) {
  RewardBreakdown out;
  const double e = (s.position.head<2>() - cmd.target_landing_xy).norm();
  out.add("tracking", kernel_phi(e, cfg.sigma[18]), cfg);
  double ehat = e;
  try {
    const LandingEstimate land =
        estimate_landing_point(s.position, s.velocity, cmd.target_ground_z, env);
    ehat = (land.xy - cmd.target_landing_xy).norm();
  } catch (const NeverLands&) {
    // keep the current planar error
  }
  out.add("est_tracking",
          kernel_phi(ehat, cfg.sigma[19]) + 0.1 * kernel_phi(ehat, cfg.sigma[20]), cfg);
  // Left (FL, BL) vs right (FR, BR) transversal angles.
  Eigen::Vector4d left(s.joints[1], s.joints[2], s.joints[7], s.joints[8]);
  Eigen::Vector4d right(s.joints[4], s.joints[5], s.joints[10], s.joints[11]);
  out.add("symmetry", kernel_phi((left - right).norm(), cfg.sigma[21]), cfg);
  return out;
}

// Body acceleration and ground reaction, sampled by the simulator.
struct JumpAux {
  Eigen::Vector3d body_accel = Eigen::Vector3d::Zero();   // m/s^2
  Eigen::Vector3d ground_force = Eigen::Vector3d::Zero(); // N, total over feet
};

inline RewardBreakdown common_jump_rewards(const RobotState& s, const JumpAux& aux,
                                           const RewardConfig& cfg) {
  RewardBreakdown out;
  out.add("angular_vel", kernel_phi(s.omega_body.norm(), cfg.sigma[22]), cfg);
  const QuaternionError qe = quaternion_error(s.orientation, Quaternion::Identity());
  const double k = kernel_phi(qe.angle, cfg.sigma[24]);
  out.add("orient_error", k * k, cfg);
  out.add("joint_pos",
          kernel_phi((s.joints - default_joint_pose()).norm(), cfg.sigma[23]), cfg);
  out.add("ground_force", aux.ground_force.squaredNorm(), cfg);

  // Soft impact: penalize deceleration aligned with the motion direction.
  Eigen::Vector3d v_tilde = Eigen::Vector3d::Zero();
  if (s.velocity.norm() > 1e-6) v_tilde = s.velocity.normalized();
  const double align = (aux.body_accel / cfg.a_body_max).dot(v_tilde);
  out.add("soft_impact", std::max(0.0, 1.0 - std::abs(std::min(0.0, align))), cfg);

  out.add("catch_landing", std::clamp(-s.velocity.z(), 0.0, 1.0), cfg);
  const Eigen::Matrix<double, 8, 1> td =
      reward_detail::transversal_angles(s.joint_velocities);
  double damp = 0.0;
  for (int i = 0; i < 8; ++i) damp += std::clamp(td[i], 0.0, 1.0);
  out.add("damp_landing", damp / 8.0, cfg);
  return out;
}

inline RewardBreakdown regularization_rewards(const JointVector& action_t,
                                              const JointVector& action_prev,
                                              const JointVector& theta_ddot,
                                              const JointVector& tau,
                                              const JointVector& theta_target,
                                              const JointVector& theta_safe,
                                              const RewardConfig& cfg) {
  RewardBreakdown out;
  out.add("action_rate", (action_t - action_prev).squaredNorm(), cfg);
  out.add("joint_acceleration", theta_ddot.squaredNorm(), cfg);
  out.add("joint_torque", tau.squaredNorm(), cfg);
  out.add("action_clip", (theta_target - theta_safe).squaredNorm(), cfg);
  return out;
}

}  // namespace lowg
