#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "lowg/actuation.hpp"
#include "lowg/ballistics.hpp"
#include "lowg/body_model.hpp"
#include "lowg/rewards.hpp"
#include "lowg/spring.hpp"
#include "lowg/state.hpp"

namespace lowg {

// Piecewise-flat height field along x (uniform in y).
struct Terrain {
  struct Segment {
    double x0, x1, z;
  };
  std::vector<Segment> segments;

  double height_at(double x, double /*y*/ = 0.0) const {
    for (const auto& seg : segments) {
      if (x >= seg.x0 && x < seg.x1) return seg.z;
    }
    return 0.0;
  }
};

struct SimConfig {
  double dt = 1e-3;  // s
  GravityEnv env = GravityEnv::mars();
  double contact_stiffness = 30000.0;  // N/m
  double contact_damping = 600.0;      // N s/m
  double friction = 1.0;               // Coulomb cap
  double tangential_damping = 400.0;   // N s/m, viscous below the cap
  // Penetration depth is clamped before computing the normal force so that a
  // foot crossing a terrain step face sideways gets a bounded push instead of
  // the full stiffness times the step height.
  double max_penetration = 0.03;       // m
  double joint_damping = 0.08;         // N m s/rad
  double control_rate = 60.0;          // Hz
  SpringParams spring;
  ActuatorConfig actuators;
  LegGeometry geom;
  BodyGeometry body;
  Terrain terrain;
  // Divergence bounds.
  double max_speed = 1e3;
  double max_omega = 1e3;
  double max_joint_rate = 1e4;
  double max_position = 1e6;

  SimConfig() { spring = default_spring_params(geom); }
};

enum class ContactPhase { Stance, Flight, Landing };

// Flight iff all feet free; Landing iff contact regained right after flight.
inline ContactPhase detect_phase(const RobotState& s, ContactPhase previous = ContactPhase::Stance) {
  if (!s.any_contact()) return ContactPhase::Flight;
  if (previous == ContactPhase::Flight) return ContactPhase::Landing;
  return ContactPhase::Stance;
}

// Per-step byproducts: applied torques, contact forces, body acceleration.
struct StepInfo {
  JointVector applied_torque = JointVector::Zero();
  Eigen::Vector3d ground_force = Eigen::Vector3d::Zero();
  Eigen::Vector3d body_accel = Eigen::Vector3d::Zero();
};

namespace sim_detail {

inline void check_bounds(const RobotState& s, const SimConfig& cfg) {
  const bool ok = s.position.allFinite() && s.velocity.allFinite() &&
                  s.omega_body.allFinite() && s.joints.allFinite() &&
                  s.joint_velocities.allFinite() &&
                  s.position.cwiseAbs().maxCoeff() < cfg.max_position &&
                  s.velocity.norm() < cfg.max_speed && s.omega_body.norm() < cfg.max_omega &&
                  s.joint_velocities.cwiseAbs().maxCoeff() < cfg.max_joint_rate;
  if (!ok) {
    throw NumericalDivergence("state bounds exceeded at t=" + std::to_string(s.time));
  }
}

// Foot world velocity: body motion plus joint-driven motion of the
// kinematically placed foot (one-sided difference over dt).
inline Eigen::Vector3d foot_velocity_world(int leg, const RobotState& s,
                                           const JointVector& q_next, double dt,
                                           const SimConfig& cfg) {
  const Eigen::Vector3d r_now = foot_position_body(leg, s.joints, cfg.geom, cfg.body);
  const Eigen::Vector3d r_next = foot_position_body(leg, q_next, cfg.geom, cfg.body);
  const Eigen::Vector3d joint_part = s.orientation * ((r_next - r_now) / dt);
  return s.velocity + s.orientation * (s.omega_body.cross(r_now)) + joint_part;
}

}  // namespace sim_detail

// One fixed-step update of the reduced-order model. Joints integrate under
// the full torque pipeline plus spring torques. In stance the body takes
// penalty contact forces at the kinematically placed feet; in flight the
// translation is exact ballistic and the attitude follows angular-momentum
// conservation against the lumped leg momenta.
inline RobotState step(const RobotState& state, const JointVector& motor_targets,
                       const SimConfig& cfg, TaskKind task = TaskKind::Walking,
                       StepInfo* info = nullptr) {
  sim_detail::check_bounds(state, cfg);
  const double dt = cfg.dt;
  RobotState next = state;

  // Joint torques and first-order joint dynamics.
  const JointVector tau_motor =
      motor_torques(motor_targets, state.joints, state.joint_velocities, task, cfg.actuators);
  const JointVector tau_spring = spring_torques(state.joints, cfg.geom, cfg.spring);
  const JointVector tau = total_torque(tau_motor, tau_spring);
  const double i_joint = cfg.body.leg_lumped_inertia;
  for (int j = 0; j < kNumJoints; ++j) {
    const double acc = (tau[j] - cfg.joint_damping * state.joint_velocities[j]) / i_joint;
    next.joint_velocities[j] = state.joint_velocities[j] + acc * dt;
    next.joints[j] = state.joints[j] + next.joint_velocities[j] * dt;
    const double lo = cfg.geom.limit_lower(j);
    const double hi = cfg.geom.limit_upper(j);
    if (next.joints[j] < lo) {
      next.joints[j] = lo;
      next.joint_velocities[j] = std::max(0.0, next.joint_velocities[j]);
    } else if (next.joints[j] > hi) {
      next.joints[j] = hi;
      next.joint_velocities[j] = std::min(0.0, next.joint_velocities[j]);
    }
  }

  // Contact forces at the current configuration.
  Eigen::Vector3d force_sum = Eigen::Vector3d::Zero();
  Eigen::Vector3d torque_world = Eigen::Vector3d::Zero();
  bool any_contact = false;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Eigen::Vector3d foot_b = foot_position_body(leg, state.joints, cfg.geom, cfg.body);
    const Eigen::Vector3d foot_w = state.position + state.orientation * foot_b;
    const double ground = cfg.terrain.height_at(foot_w.x(), foot_w.y());
    const double pen = ground - foot_w.z();
    next.foot_contacts[leg] = pen > 0.0;
    if (pen <= 0.0) continue;
    any_contact = true;
    const Eigen::Vector3d v_foot =
        sim_detail::foot_velocity_world(leg, state, next.joints, dt, cfg);
    const double fn = std::max(
        0.0, cfg.contact_stiffness * std::min(pen, cfg.max_penetration) -
                 cfg.contact_damping * v_foot.z());
    Eigen::Vector3d f(0.0, 0.0, fn);
    const Eigen::Vector2d vt = v_foot.head<2>();
    const double vt_norm = vt.norm();
    if (vt_norm > 1e-9) {
      const double ft = std::min(cfg.friction * fn, cfg.tangential_damping * vt_norm);
      f.head<2>() = -ft * vt / vt_norm;
    }
    force_sum += f;
    torque_world += (foot_w - state.position).cross(f);
  }
  if (info) {
    info->applied_torque = tau;
    info->ground_force = force_sum;
  }

  const Eigen::Vector3d gravity(0.0, 0.0, -cfg.env.g);
  const Eigen::Vector3d accel = force_sum / cfg.body.mass + gravity;
  if (info) info->body_accel = accel;

  // Translation: constant-acceleration exact update (exact ballistic flight).
  next.velocity = state.velocity + accel * dt;
  next.position = state.position + state.velocity * dt + 0.5 * accel * dt * dt;

  if (!state.any_contact() && !any_contact) {
    // Flight attitude: conserve total angular momentum in the world frame.
    const Eigen::Matrix<double, 3, 12> a_map = leg_momentum_matrix(cfg.body);
    const Eigen::Vector3d h_world =
        state.orientation * (cfg.body.body_inertia * state.omega_body +
                             a_map * state.joint_velocities);
    const Eigen::Matrix3d i_inv = cfg.body.body_inertia.inverse();
    const Eigen::Vector3d leg_h = a_map * next.joint_velocities;
    Quaternion q = state.orientation;
    Eigen::Vector3d omega = state.omega_body;
    for (int it = 0; it < 4; ++it) {
      omega = i_inv * (q.conjugate() * h_world - leg_h);
      q = integrate_orientation(state.orientation, omega, dt);
    }
    next.omega_body = omega;
    next.orientation = q;
  } else {
    // Stance/landing: rigid-body rotational dynamics under contact torques.
    const Eigen::Vector3d tau_body = state.orientation.conjugate() * torque_world;
    const Eigen::Vector3d i_omega = cfg.body.body_inertia * state.omega_body;
    const Eigen::Vector3d omega_dot = cfg.body.body_inertia.inverse() *
                                      (tau_body - state.omega_body.cross(i_omega));
    next.omega_body = state.omega_body + omega_dot * dt;
    next.orientation = integrate_orientation(state.orientation, next.omega_body, dt);
  }

  next.time = state.time + dt;
  return next;
}

struct TrajectoryPoint {
  RobotState state;
  JointVector applied_torque = JointVector::Zero();
  std::optional<RewardBreakdown> rewards;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
};

// Controller queried at the control rate; targets are held between ticks.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual JointVector targets(const RobotState& state, const CommandState& cmd) = 0;
  virtual TaskKind task() const { return TaskKind::Walking; }
};

// Fixed-step rollout with a zero-order hold between 60 Hz controller ticks.
inline Trajectory run_episode(const RobotState& initial, Controller& controller,
                              const CommandState& cmd, const SimConfig& cfg, double horizon) {
  if (horizon <= 0.0) throw ValidationError("horizon must be positive");
  const long steps = std::lround(horizon / cfg.dt);
  Trajectory traj;
  traj.points.reserve(static_cast<std::size_t>(steps));
  RobotState s = initial;
  JointVector held = default_joint_pose();
  double next_tick = s.time;
  const double tick_period = 1.0 / cfg.control_rate;
  for (long i = 0; i < steps; ++i) {
    if (s.time + 1e-12 >= next_tick) {
      held = controller.targets(s, cmd);
      next_tick += tick_period;
    }
    StepInfo info;
    s = step(s, held, cfg, controller.task(), &info);
    traj.points.push_back({s, info.applied_torque, std::nullopt});
  }
  return traj;
}

}  // namespace lowg
