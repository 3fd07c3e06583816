#pragma once

#include <array>

#include "lowg/quat.hpp"
#include "lowg/types.hpp"

namespace lowg {

inline JointVector default_joint_pose() {
  JointVector q = JointVector::Zero();
  for (int leg = 0; leg < kNumLegs; ++leg) {
    q[joint_index(leg, JointRole::InnerTransversal)] = deg2rad(45.0);
    q[joint_index(leg, JointRole::OuterTransversal)] = deg2rad(45.0);
  }
  return q;
}

// Single source of truth flowing through sim, rewards, and the mission FSM.
struct RobotState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();   // world, m
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();   // world, m/s
  Quaternion orientation = Quaternion::Identity();      // body -> world
  Eigen::Vector3d omega_body = Eigen::Vector3d::Zero(); // body frame, rad/s
  JointVector joints = default_joint_pose();
  JointVector joint_velocities = JointVector::Zero();
  std::array<bool, 4> foot_contacts{false, false, false, false};
  double time = 0.0;

  bool any_contact() const {
    return foot_contacts[0] || foot_contacts[1] || foot_contacts[2] || foot_contacts[3];
  }
  bool all_contact() const {
    return foot_contacts[0] && foot_contacts[1] && foot_contacts[2] && foot_contacts[3];
  }
};

// Commands shared by the policies and reward terms.
struct CommandState {
  Eigen::Vector2d commanded_velocity_xy = Eigen::Vector2d::Zero();  // c_xy, m/s
  double yaw_rate = 0.0;                                            // omega_z*, rad/s
  double target_height = 0.0;               // h*, absolute apogee target, m
  Eigen::Vector2d target_landing_xy = Eigen::Vector2d::Zero();      // m
  double target_ground_z = 0.0;             // ground height at the landing target, m
  Quaternion reference_orientation = Quaternion::Identity();        // q_R
  JointVector joint_targets = default_joint_pose();                 // theta*
};

// Running per-episode statistics consumed by jump rewards.
struct EpisodeStats {
  double max_height = 0.0;  // h_m, m

  void observe(const RobotState& s) { max_height = std::max(max_height, s.position.z()); }
};

}  // namespace lowg
