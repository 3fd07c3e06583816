#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lowg/policy.hpp"
#include "lowg/sim.hpp"

namespace lowg {

// --- Plan -------------------------------------------------------------------

enum class MissionMode { Walk, VerticalJump, ForwardJump };

inline std::string mission_mode_name(MissionMode m) {
  switch (m) {
    case MissionMode::Walk: return "walk";
    case MissionMode::VerticalJump: return "vertical_jump";
    default: return "forward_jump";
  }
}

// Waypoints carry a planar goal and yaw. Walk waypoints are navigation
// targets. Jump waypoints interpret (x, y) as the landing target; param is
// the apogee height above the launch ground (vertical) and is informational
// for forward jumps (expected jump distance).
struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;  // rad
  MissionMode mode = MissionMode::Walk;
  double param = 0.0;
};

struct MissionPlan {
  std::vector<Waypoint> waypoints;
  GravityEnv env = GravityEnv::mars();
  Terrain terrain;

  bool valid() const { return !waypoints.empty(); }
};

inline MissionPlan load_plan(const nlohmann::json& j) {
  MissionPlan plan;
  if (!j.is_object()) throw ValidationError("mission: top level must be an object");
  if (!j.contains("version")) throw ValidationError("mission: missing field 'version'");
  if (j.at("version").get<int>() != 1) {
    throw ValidationError("mission: unsupported version " + j.at("version").dump());
  }
  if (j.contains("gravity")) {
    const std::string g = j.at("gravity").get<std::string>();
    if (g == "mars") plan.env = GravityEnv::mars();
    else if (g == "moon") plan.env = GravityEnv::moon();
    else if (g == "earth") plan.env = GravityEnv::earth();
    else throw ValidationError("mission: unknown gravity '" + g + "'");
  }
  if (j.contains("terrain")) {
    for (const auto& seg : j.at("terrain")) {
      for (const char* f : {"x0", "x1", "z"}) {
        if (!seg.contains(f)) throw ValidationError(std::string("mission: terrain segment missing field '") + f + "'");
      }
      plan.terrain.segments.push_back(
          {seg.at("x0").get<double>(), seg.at("x1").get<double>(), seg.at("z").get<double>()});
    }
  }
  if (!j.contains("waypoints")) throw ValidationError("mission: missing field 'waypoints'");
  int index = 0;
  for (const auto& w : j.at("waypoints")) {
    Waypoint wp;
    const std::string at = "mission: waypoint " + std::to_string(index);
    for (const char* f : {"x", "y", "mode"}) {
      if (!w.contains(f)) throw ValidationError(at + ": missing field '" + f + "'");
    }
    wp.x = w.at("x").get<double>();
    wp.y = w.at("y").get<double>();
    wp.yaw = deg2rad(w.value("yaw_deg", 0.0));
    const std::string mode = w.at("mode").get<std::string>();
    if (mode == "walk") wp.mode = MissionMode::Walk;
    else if (mode == "vertical_jump") wp.mode = MissionMode::VerticalJump;
    else if (mode == "forward_jump") wp.mode = MissionMode::ForwardJump;
    else throw ValidationError(at + ": unknown mode '" + mode + "'");
    if (wp.mode != MissionMode::Walk) {
      if (!w.contains("param")) throw ValidationError(at + ": missing field 'param'");
      wp.param = w.at("param").get<double>();
      if (!(wp.param > 0.0)) throw ValidationError(at + ": field 'param' must be positive");
    }
    if (!std::isfinite(wp.x) || !std::isfinite(wp.y)) {
      throw ValidationError(at + ": non-finite coordinates");
    }
    plan.waypoints.push_back(wp);
    ++index;
  }
  if (plan.waypoints.empty()) throw ValidationError("mission: 'waypoints' must be non-empty");
  return plan;
}

inline MissionPlan load_plan_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("mission: ") + e.what());
  }
  return load_plan(j);
}

inline MissionPlan load_plan_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open mission file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return load_plan_text(ss.str());
}

// --- FSM --------------------------------------------------------------------

enum class MissionPhase {
  Walking,
  StanceStabilize,
  JumpTakeoff,
  FlightAttitude,
  LandingHandback,
  Recovery,
  Complete
};

inline std::string mission_phase_name(MissionPhase p) {
  switch (p) {
    case MissionPhase::Walking: return "walking";
    case MissionPhase::StanceStabilize: return "stance_stabilize";
    case MissionPhase::JumpTakeoff: return "jump_takeoff";
    case MissionPhase::FlightAttitude: return "flight_attitude";
    case MissionPhase::LandingHandback: return "landing_handback";
    case MissionPhase::Recovery: return "recovery";
    default: return "complete";
  }
}

struct FsmConfig {
  double waypoint_tolerance = 0.07;   // m
  double stance_stabilize_time = 1.0; // s
  double flight_altitude = 0.6;       // m above local terrain
  double handback_altitude = 0.9;     // m above local terrain
  double recovery_time = 0.5;         // s
  double yaw_tolerance = deg2rad(5.0);
  double watchdog = 120.0;            // s per waypoint
  double walk_speed = 0.35;           // m/s command cap
  double walk_gain = 0.8;             // 1/s position-to-velocity gain
  double yaw_gain = 1.5;              // 1/s
  double yaw_rate_cap = 0.6;          // rad/s
};

struct FsmState {
  MissionPhase phase = MissionPhase::Walking;
  double timer = 0.0;       // s in the current phase
  int waypoint = 0;
  bool complete() const { return phase == MissionPhase::Complete; }
};

struct FsmOutput {
  FsmState fsm;
  PolicyKind policy = PolicyKind::Walking;
  CommandState cmd;
};

inline double yaw_of(const Quaternion& q) {
  const Eigen::Vector3d fwd = q * Eigen::Vector3d::UnitX();
  return std::atan2(fwd.y(), fwd.x());
}

inline double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a < -kPi) a += 2.0 * kPi;
  return a;
}

// One FSM decision at the control cadence. Deterministic: the next state and
// active policy depend only on (fsm, state, plan, cfg, dt).
inline FsmOutput fsm_step(const FsmState& fsm, const RobotState& s, const MissionPlan& plan,
                          const FsmConfig& cfg, double dt) {
  FsmOutput out;
  out.fsm = fsm;
  if (fsm.phase == MissionPhase::Complete || fsm.waypoint >= static_cast<int>(plan.waypoints.size())) {
    out.fsm.phase = MissionPhase::Complete;
    out.policy = PolicyKind::Walking;
    return out;
  }
  const Waypoint& wp = plan.waypoints[fsm.waypoint];
  const double ground = plan.terrain.height_at(s.position.x(), s.position.y());
  const double altitude = s.position.z() - ground;
  const double yaw = yaw_of(s.orientation);
  const double yaw_err = wrap_angle(wp.yaw - yaw);
  const Eigen::Vector2d to_wp = Eigen::Vector2d(wp.x, wp.y) - s.position.head<2>();

  auto advance = [&](FsmOutput& o) {
    o.fsm.waypoint += 1;
    o.fsm.timer = 0.0;
    o.fsm.phase = o.fsm.waypoint >= static_cast<int>(plan.waypoints.size())
                      ? MissionPhase::Complete
                      : MissionPhase::Walking;
  };

  out.fsm.timer += dt;
  out.policy = PolicyKind::Walking;
  out.cmd.reference_orientation =
      Quaternion(Eigen::AngleAxisd(wp.yaw, Eigen::Vector3d::UnitZ()));

  switch (fsm.phase) {
    case MissionPhase::Walking: {
      if (wp.mode != MissionMode::Walk) {
        out.fsm.phase = MissionPhase::StanceStabilize;
        out.fsm.timer = 0.0;
        break;
      }
      if (to_wp.norm() < cfg.waypoint_tolerance && std::abs(yaw_err) < cfg.yaw_tolerance) {
        advance(out);
        break;
      }
      Eigen::Vector2d v = cfg.walk_gain * to_wp;
      if (v.norm() > cfg.walk_speed) v *= cfg.walk_speed / v.norm();
      out.cmd.commanded_velocity_xy = v;
      out.cmd.yaw_rate = std::clamp(cfg.yaw_gain * yaw_err, -cfg.yaw_rate_cap, cfg.yaw_rate_cap);
      break;
    }
    case MissionPhase::StanceStabilize: {
      // Zero commands: exact stance hold. Restart the clock if contact or
      // yaw alignment is lost.
      if (!s.all_contact() || std::abs(yaw_err) >= cfg.yaw_tolerance) {
        out.fsm.timer = 0.0;
        out.cmd.yaw_rate = std::clamp(cfg.yaw_gain * yaw_err, -cfg.yaw_rate_cap, cfg.yaw_rate_cap);
        break;
      }
      if (out.fsm.timer >= cfg.stance_stabilize_time) {
        out.fsm.phase = MissionPhase::JumpTakeoff;
        out.fsm.timer = 0.0;
      }
      break;
    }
    case MissionPhase::JumpTakeoff: {
      out.policy =
          wp.mode == MissionMode::VerticalJump ? PolicyKind::VerticalJump : PolicyKind::ForwardJump;
      out.cmd.target_height = ground + wp.param;  // absolute apogee for vertical
      out.cmd.target_landing_xy = Eigen::Vector2d(wp.x, wp.y);
      out.cmd.target_ground_z = plan.terrain.height_at(wp.x, wp.y);
      if (!s.any_contact() && altitude > cfg.flight_altitude && s.velocity.z() > 0.0) {
        out.fsm.phase = MissionPhase::FlightAttitude;
        out.fsm.timer = 0.0;
      }
      break;
    }
    case MissionPhase::FlightAttitude: {
      out.policy = PolicyKind::AttitudeControl;
      if (altitude < cfg.handback_altitude && s.velocity.z() < 0.0) {
        out.fsm.phase = MissionPhase::LandingHandback;
        out.fsm.timer = 0.0;
      }
      break;
    }
    case MissionPhase::LandingHandback: {
      out.policy =
          wp.mode == MissionMode::VerticalJump ? PolicyKind::VerticalJump : PolicyKind::ForwardJump;
      out.cmd.target_height = ground + wp.param;
      out.cmd.target_landing_xy = Eigen::Vector2d(wp.x, wp.y);
      out.cmd.target_ground_z = plan.terrain.height_at(wp.x, wp.y);
      if (s.any_contact()) {
        out.fsm.phase = MissionPhase::Recovery;
        out.fsm.timer = 0.0;
      }
      break;
    }
    case MissionPhase::Recovery: {
      // Zero commands: settle in stance, then the waypoint is done.
      if (!s.any_contact()) out.fsm.timer = 0.0;
      if (out.fsm.timer >= cfg.recovery_time) advance(out);
      break;
    }
    case MissionPhase::Complete:
      break;
  }
  return out;
}

// --- Leg inverse kinematics (oracle helper) ---------------------------------

// Transversal angles placing the foot at (x, z) in the leg sagittal plane,
// knee-out branch. Lateral angle is returned as zero.
inline LegJointAngles leg_ik(const Eigen::Vector2d& foot, const LegGeometry& g) {
  auto knee_for = [&](const Eigen::Vector2d& hip, double l_up, double l_low,
                      bool pick_low_x) -> Eigen::Vector2d {
    const Eigen::Vector2d delta = foot - hip;
    const double d = delta.norm();
    if (d > l_up + l_low || d < std::abs(l_up - l_low) || d < 1e-12) {
      throw ClosureUnreachable("foot target out of reach: hip distance " + std::to_string(d));
    }
    const double along = (l_up * l_up - l_low * l_low + d * d) / (2.0 * d);
    const double h = std::sqrt(std::max(0.0, l_up * l_up - along * along));
    const Eigen::Vector2d u = delta / d;
    const Eigen::Vector2d perp(-u.y(), u.x());
    const Eigen::Vector2d a = hip + along * u + h * perp;
    const Eigen::Vector2d b = hip + along * u - h * perp;
    if (pick_low_x) return a.x() < b.x() ? a : b;
    return a.x() > b.x() ? a : b;
  };
  const Eigen::Vector2d hip_i(-g.l0 / 2.0, 0.0);
  const Eigen::Vector2d hip_o(g.l0 / 2.0, 0.0);
  const Eigen::Vector2d ki = knee_for(hip_i, g.l1, g.l3, true);
  const Eigen::Vector2d ko = knee_for(hip_o, g.l2, g.l4, false);
  LegJointAngles a;
  a.theta_inner_transversal = std::atan2(-(ki.x() - hip_i.x()), -ki.y());
  a.theta_outer_transversal = std::atan2(ko.x() - hip_o.x(), -ko.y());
  return a;
}

// --- Oracle controllers ------------------------------------------------------

// Scripted trot: diagonal pairs alternate, stance feet sweep opposite the
// commanded body velocity, swing feet return with a lift. Zero command holds
// the exact default stance.
class OracleWalkController : public Controller {
 public:
  explicit OracleWalkController(const SimConfig& cfg)
      : geom_(cfg.geom), body_(cfg.body), tick_(1.0 / cfg.control_rate) {}

  JointVector targets(const RobotState& s, const CommandState& cmd) override {
    const double yaw = yaw_of(s.orientation);
    const Eigen::Rotation2Dd to_body(-yaw);
    const Eigen::Vector2d v_body = to_body * cmd.commanded_velocity_xy;
    const double wz = cmd.yaw_rate;
    const double activity = v_body.norm() + std::abs(wz) * 0.3;
    if (activity < 1e-6) {
      phase_ = 0.0;
      return default_joint_pose();
    }
    phase_ += tick_ / period_;
    phase_ -= std::floor(phase_);

    const double h0 = stance_height(geom_);
    JointVector q = default_joint_pose();
    for (int leg = 0; leg < kNumLegs; ++leg) {
      // Diagonal pairing: FL+BR one half-period, FR+BL the other.
      const double offset = (leg == 0 || leg == 3) ? 0.0 : 0.5;
      double p = phase_ + offset;
      p -= std::floor(p);

      // Desired planar foot velocity during stance (body frame): oppose the
      // body twist at the leg mount.
      const Eigen::Vector3d mount = body_.leg_mount(leg);
      Eigen::Vector2d u = -v_body;
      u.x() += wz * mount.y();
      u.y() -= wz * mount.x();
      const Eigen::Vector2d half_stride = u * (duty_ * period_ / 2.0);

      Eigen::Vector2d foot_xy;
      double lift = 0.0;
      if (p < duty_) {
        const double f = p / duty_;  // 0 -> 1 across stance
        foot_xy = -half_stride + 2.0 * f * half_stride;
      } else {
        const double f = (p - duty_) / (1.0 - duty_);
        foot_xy = half_stride - 2.0 * f * half_stride;
        lift = lift_ * std::sin(kPi * f);
      }
      // Clamp the stride to the workspace.
      const double max_xy = 0.13;
      foot_xy.x() = std::clamp(foot_xy.x(), -max_xy, max_xy);
      foot_xy.y() = std::clamp(foot_xy.y(), -max_xy, max_xy);

      const double z = -h0 + lift;
      LegJointAngles a;
      try {
        a = leg_ik({foot_xy.x(), z}, geom_);
      } catch (const ClosureUnreachable&) {
        a = LegJointAngles{0.0, deg2rad(45.0), deg2rad(45.0)};
      }
      // Planar y via the lateral joint: y ~ sign * theta_l * height.
      const double s_lat = lateral_abduction_sign(leg);
      a.theta_lateral = s_lat * std::atan2(foot_xy.y(), h0);
      q[joint_index(leg, JointRole::Lateral)] = a.theta_lateral;
      q[joint_index(leg, JointRole::InnerTransversal)] = a.theta_inner_transversal;
      q[joint_index(leg, JointRole::OuterTransversal)] = a.theta_outer_transversal;
    }
    return safety_filter(q, geom_);
  }

  TaskKind task() const override { return TaskKind::Walking; }

  void reset() { phase_ = 0.0; }

 private:
  LegGeometry geom_;
  BodyGeometry body_;
  double tick_;
  double period_ = 0.5;  // s
  double duty_ = 0.5;
  double lift_ = 0.05;  // m
  double phase_ = 0.0;
};

// Tunable constants of the scripted jump controller. Defaults are calibrated
// for Mars gravity with the default geometry and actuators.
struct JumpTuning {
  double squat_angle = deg2rad(115.0);  // rad, symmetric crouch (vertical jump)
  double ext_length_vertical = 0.46;    // m commanded leg extension
  double squat_length = 0.16;           // m leg length in the forward-jump crouch
  double ext_length_forward = 0.44;     // m commanded radial extension (forward)
  double squat_ramp_time = 1.2;         // s quasi-static crouch ramp (forward)
  double angle_min = 0.14;              // rad launch tilt from vertical, lower bound
  double angle_max = 0.67;              // rad launch tilt upper bound (friction margin)
  double cutoff_margin = 0.0;           // m of predicted apogee
  double forward_cutoff_margin = 0.18;  // m of predicted range (touchdown bias)
  double slide_max = 0.1;               // m extra margin for short flat jumps
  double slide_ref = 2.0;               // m target below which the slide margin grows
  double slide_span = 0.8;              // m ramp width of the slide margin
  double boost_per_rate = 0.020;        // m/s gained per rad/s of joint speed at cut
  double gain_growth = 1.5;             // per-tick growth allowance for the gain
};

// Scripted squat-then-extend jump. During the extension the predicted
// ballistic outcome (apogee for vertical, landing point for forward) is
// tracked with the flight estimators. At 60 Hz a full-thrust tick changes
// the outcome by far more than the accuracy budget, so the stroke is
// modulated: each tick compares the predicted outcome now against the
// outcome after one more tick at the current effort and commands a
// proportional thrust fraction, realized by inverting the joint PD law.
class OracleJumpController : public Controller {
 public:
  enum class Stage { Idle, Squat, Extend, Flight, Land };

  OracleJumpController(const SimConfig& cfg, PolicyKind kind, const JumpTuning& tune = {})
      : geom_(cfg.geom), body_(cfg.body), env_(cfg.env), actuators_(cfg.actuators),
        kind_(kind), tick_(1.0 / cfg.control_rate), tune_(tune) {}

  JointVector targets(const RobotState& s, const CommandState& cmd) override {
    switch (stage_) {
      case Stage::Idle:
        stage_ = Stage::Squat;
        stage_time_ = 0.0;
        jump_origin_xy_ = s.position.head<2>();
        origin_ground_ = s.position.z() - stance_height(geom_);
        launch_angle_ = kind_ == PolicyKind::ForwardJump ? plan_launch_angle(cmd) : 0.0;
        [[fallthrough]];
      case Stage::Squat: {
        stage_time_ += tick_;
        const JointVector q = squat_targets(cmd);
        double worst = 0.0;
        for (int j = 0; j < kNumJoints; ++j) {
          if (!is_lateral(j)) worst = std::max(worst, std::abs(s.joints[j] - q[j]));
        }
        const bool settled = worst < deg2rad(4.0) &&
                             s.joint_velocities.cwiseAbs().maxCoeff() < 0.5 && s.all_contact();
        const double squat_timeout = kind_ == PolicyKind::ForwardJump ? 4.0 : 2.5;
        if ((settled && stage_time_ > 0.3) || stage_time_ > squat_timeout) {
          stage_ = Stage::Extend;
          stage_time_ = 0.0;
          prev_velocity_ = s.velocity;
          last_frac_ = 1.0;
          best_outcome_ = 0.0;
        }
        return q;
      }
      case Stage::Extend: {
        stage_time_ += tick_;
        const Eigen::Vector3d dv = s.velocity - prev_velocity_;
        prev_velocity_ = s.velocity;
        // Residual push after a cut: the joints cannot stop instantly, so the
        // feet keep extending briefly. Empirically the body gains about
        // tune_.boost_per_rate m/s per rad/s of transversal joint speed when the
        // cut comes from full effort; after a throttled tick the leg momentum
        // is already spent, so the residual scales with the last effort.
        double rate = 0.0;
        for (int j = 0; j < kNumJoints; ++j) {
          if (!is_lateral(j)) rate += std::abs(s.joint_velocities[j]) / 8.0;
        }
        Eigen::Vector3d thrust_dir = s.velocity.norm() > 0.3
                                         ? s.velocity.normalized()
                                         : Eigen::Vector3d::UnitZ();
        const Eigen::Vector3d v_now =
            s.velocity + tune_.boost_per_rate * rate * last_frac_ * thrust_dir;
        const double m_now = predicted_outcome(s, v_now, cmd);
        const double m_target = outcome_target(s, cmd);
        // Forward jumps lose horizontal speed late in the stroke as the
        // extension mode steepens, so the predicted range peaks mid-stroke.
        // If the target is beyond the peak, cut there: burning further only
        // shortens the jump and destabilizes the launch.
        const bool past_peak = kind_ == PolicyKind::ForwardJump &&
                               best_outcome_ > 0.3 * m_target &&
                               m_now < best_outcome_ - 0.12;
        best_outcome_ = std::max(best_outcome_, m_now);
        if (m_now >= m_target || past_peak ||
            (!s.any_contact() && stage_time_ > 0.05) || stage_time_ > 1.5) {
          stage_ = Stage::Flight;
          hold_ = s.joints;
          return hold_;
        }
        // Deadbeat effort: the outcome gained over the last tick, normalized
        // by the effort that was commanded, estimates the full-effort per-tick
        // gain (both outcome measures are invariant under thrust-free flight,
        // so the gain is proportional to effort). Command the fraction that
        // puts the next tick's predicted outcome exactly on the target.
        const double m_lead = predicted_outcome(s, v_now + dv, cmd);
        const double gap = m_target - m_now;
        // The per-tick gain still grows while the stroke accelerates, so the
        // lead extrapolation under-predicts; inflating it starts the taper a
        // tick early and the deadbeat converges from below.
        const double gain_full =
            tune_.gain_growth * (m_lead - m_now) / std::max(last_frac_, 0.05);
        double frac = 1.0;
        if (gain_full > 1e-9) frac = std::clamp(gap / gain_full, 0.0, 1.0);
        last_frac_ = frac;
#ifdef LOWG_JUMP_DEBUG
        printf("[ext] t=%.3f z=%.3f v=(%.2f %.2f) m_now=%.3f m_lead=%.3f tgt=%.3f frac=%.3f rate=%.1f contact=%d\n",
               s.time, s.position.z(), s.velocity.x(), s.velocity.z(),
               m_now, m_lead, m_target, frac, rate, (int)s.any_contact());
#endif
        // Vertical thrust throttles torque through PD inversion; the forward
        // ray tracker throttles by shortening the lead instead, which slows
        // the stroke without bending the foot path off the ray.
        const JointVector full = extend_targets(s, cmd, frac);
        if (kind_ == PolicyKind::ForwardJump || frac >= 1.0) return full;
        return scaled_thrust_targets(s, full, frac);
      }
      case Stage::Flight:
        if (s.any_contact()) {
          stage_ = Stage::Land;
        }
        return hold_;
      case Stage::Land:
      default:
        return land_targets(s);
    }
  }

  TaskKind task() const override {
    return kind_ == PolicyKind::VerticalJump ? TaskKind::VerticalJump : TaskKind::ForwardJump;
  }

  // Called by the runner on the flight -> landing handover so the landing
  // stage starts from the current pose.
  void notify_landing(const RobotState& s) {
    stage_ = Stage::Land;
    hold_ = s.joints;
  }

  void reset() {
    stage_ = Stage::Idle;
    stage_time_ = 0.0;
  }

  Stage stage() const { return stage_; }

 private:
  // Scalar ballistic outcome the cutoff tracks: predicted apogee for vertical
  // jumps, predicted downrange landing distance (along the bearing to the
  // target) for forward jumps.
  double predicted_outcome(const RobotState& s, const Eigen::Vector3d& v,
                           const CommandState& cmd) const {
    if (kind_ == PolicyKind::VerticalJump) {
      return estimate_apogee(s.position.z(), v.z(), env_);
    }
    if (v.head<2>().norm() < 1e-6 || v.z() <= 0.0) return 0.0;
    try {
      const double body_ground = cmd.target_ground_z + stance_height(geom_);
      const LandingEstimate land = estimate_landing_point(s.position, v, body_ground, env_);
      const Eigen::Vector2d to_target = cmd.target_landing_xy - jump_origin_xy_;
      const Eigen::Vector2d dir =
          to_target.norm() > 1e-9 ? to_target.normalized() : Eigen::Vector2d(1.0, 0.0);
      return (land.xy - jump_origin_xy_).dot(dir);
    } catch (const NeverLands&) {
      return 0.0;
    }
  }

  double outcome_target(const RobotState&, const CommandState& cmd) const {
    if (kind_ == PolicyKind::VerticalJump) return cmd.target_height - tune_.cutoff_margin;
    // Short, flat jumps land with proportionally more horizontal speed left,
    // so the post-touchdown slide eats more of the budget; widen the margin
    // for them.
    const double want = (cmd.target_landing_xy - jump_origin_xy_).norm();
    // Landing uphill kills the remaining speed quickly, so no slide there.
    const double climb = std::max(0.0, cmd.target_ground_z - origin_ground_);
    const double slide =
        climb > 0.05
            ? 0.0
            : tune_.slide_max *
                  std::clamp((tune_.slide_ref - want) / tune_.slide_span, 0.0, 1.0);
    return want - tune_.forward_cutoff_margin - slide;
  }

  // Launch tilt from vertical for a forward jump. Scans the allowed tilt
  // range and picks the angle that reaches the target point (landing plane
  // relative to the launch terrain) with the least launch speed. The burn is
  // radial, so the tilt is fixed at squat time and the cutoff only modulates
  // the speed along it.
  double plan_launch_angle(const CommandState& cmd) const {
    const double want = (cmd.target_landing_xy - jump_origin_xy_).norm();
    const double dz = cmd.target_ground_z - origin_ground_;
    double best_th = 0.5 * (tune_.angle_min + tune_.angle_max);
    double best_v2 = std::numeric_limits<double>::infinity();
    for (double th = tune_.angle_min; th <= tune_.angle_max + 1e-9; th += 0.01) {
      // Landing body height relative to the liftoff body height.
      const double rise =
          dz + stance_height(geom_) - tune_.ext_length_forward * std::cos(th);
      const double denom = want / std::tan(th) - rise;
      if (denom <= 0.0) continue;  // cannot arc that high at this tilt
      const double v2 =
          env_.g * want * want / (2.0 * std::sin(th) * std::sin(th) * denom);
      if (v2 < best_v2) {
        best_v2 = v2;
        best_th = th;
      }
    }
    return best_th;
  }

  // Crouch pose held before the burn. Vertical jumps squat symmetrically
  // under the body. Forward jumps crouch with every foot at the same offset
  // -squat_length * (sin th, cos th) from its mount, so the burn can extend
  // all legs radially along the launch direction. The pose is identical for
  // all four legs: the support span stays centered under the body and the
  // two pairs carry equal load.
  JointVector squat_targets(const CommandState& cmd) const {
    (void)cmd;
    JointVector q = default_joint_pose();
    LegJointAngles a{0.0, tune_.squat_angle, tune_.squat_angle};
    if (kind_ == PolicyKind::ForwardJump) {
      // Quasi-static ramp from the stance pose to the tilted crouch.
      const double z0 =
          forward_kinematics({0.0, deg2rad(45.0), deg2rad(45.0)}, geom_).foot.y();
      const double u = std::clamp(stage_time_ / tune_.squat_ramp_time, 0.0, 1.0);
      const Eigen::Vector2d from(0.0, z0);
      const Eigen::Vector2d to(-tune_.squat_length * std::sin(launch_angle_),
                               -tune_.squat_length * std::cos(launch_angle_));
      const Eigen::Vector2d p = from + u * (to - from);
      try {
        a = leg_ik({p.x(), p.y()}, geom_);
      } catch (const ClosureUnreachable&) {
        a = {0.0, tune_.squat_angle, tune_.squat_angle};
      }
    }
    for (int leg = 0; leg < kNumLegs; ++leg) {
      q[joint_index(leg, JointRole::Lateral)] = 0.0;
      q[joint_index(leg, JointRole::InnerTransversal)] = a.theta_inner_transversal;
      q[joint_index(leg, JointRole::OuterTransversal)] = a.theta_outer_transversal;
    }
    return safety_filter(q, geom_);
  }

  // Full-extension target of the burn. Both jump kinds are radial strokes:
  // every leg extends along a fixed direction from its mount (straight down
  // for vertical, tilted back by the launch angle for forward), so each leg
  // moves in its symmetric mode (zero lumped angular momentum) and the two
  // pairs see identical geometry, which keeps their ground forces equal and
  // the pitch torques cancelled. The PD saturates on the distant target,
  // producing maximum effort until cutoff.
  JointVector extend_targets(const RobotState& s, const CommandState& cmd) const {
    (void)s;
    (void)cmd;  // yaw alignment toward the target happens before the jump
    JointVector q = default_joint_pose();
    double reach_x = 0.0, reach_z = -tune_.ext_length_vertical;
    if (kind_ == PolicyKind::ForwardJump) {
      reach_x = -tune_.ext_length_forward * std::sin(launch_angle_);
      reach_z = -tune_.ext_length_forward * std::cos(launch_angle_);
    }
    LegJointAngles a;
    try {
      a = leg_ik({reach_x, reach_z}, geom_);
    } catch (const ClosureUnreachable&) {
      a = LegJointAngles{0.0, deg2rad(10.0), deg2rad(10.0)};
    }
    for (int leg = 0; leg < kNumLegs; ++leg) {
      q[joint_index(leg, JointRole::Lateral)] = 0.0;
      q[joint_index(leg, JointRole::InnerTransversal)] = a.theta_inner_transversal;
      q[joint_index(leg, JointRole::OuterTransversal)] = a.theta_outer_transversal;
    }
    return safety_filter(q, geom_);
  }

  Eigen::Vector2d bearing(const CommandState& cmd) const {
    const Eigen::Vector2d to_target = cmd.target_landing_xy - jump_origin_xy_;
    return to_target.norm() > 1e-9 ? Eigen::Vector2d(to_target.normalized())
                                   : Eigen::Vector2d(1.0, 0.0);
  }

  // Partial-effort thrust: the PD law is inverted per joint so the applied
  // torque is the given fraction of what the full extension target would
  // command, keeping the thrust direction of the full stroke.
  JointVector scaled_thrust_targets(const RobotState& s, const JointVector& full,
                                    double frac) const {
    return scaled_thrust_targets(s, full, frac, frac);
  }

  // Per-pair variant: front legs (0, 1) and back legs (2, 3) can be
  // throttled independently for pitch balance during a loaded stroke.
  JointVector scaled_thrust_targets(const RobotState& s, const JointVector& full,
                                    double frac_front, double frac_back) const {
    JointVector q = full;
    for (int j = 0; j < kNumJoints; ++j) {
      if (is_lateral(j)) continue;
      const MotorParams p = actuators_.params_for(j);
      const double tau_full =
          saturate_torque(pd_torque(full[j], s.joints[j], s.joint_velocities[j], p),
                          s.joint_velocities[j], p);
      const double frac = j / kJointsPerLeg < 2 ? frac_front : frac_back;
      const double tau_des = frac * tau_full;
      // Target that realizes tau_des through the PD law at the current state.
      q[j] = s.joints[j] + (tau_des + p.kd * s.joint_velocities[j]) / p.kp;
    }
    return safety_filter(q, geom_);
  }

  // Landing recovery: absorb the impact, then stand back up.
  JointVector land_targets(const RobotState& s) const {
    // Absorb the impact first: tracking the current pose leaves only the
    // derivative term, so the legs fold under the body like a damper instead
    // of bouncing the touchdown speed back. Once slow, rise to stance.
    if (s.velocity.norm() > 0.4 || s.joint_velocities.cwiseAbs().maxCoeff() > 3.0) {
      return safety_filter(s.joints, geom_);
    }
    // Rate-limited ramp from the measured pose toward the default stance so
    // the body rises quasi-statically even from a fully folded touchdown.
    const JointVector stance = default_joint_pose();
    const double step = 1.5 * tick_;
    JointVector q = s.joints;
    for (int j = 0; j < kNumJoints; ++j) {
      q[j] += std::clamp(stance[j] - s.joints[j], -step, step);
    }
    return safety_filter(q, geom_);
  }

  LegGeometry geom_;
  BodyGeometry body_;
  GravityEnv env_;
  ActuatorConfig actuators_;
  PolicyKind kind_;
  double tick_;
  Stage stage_ = Stage::Idle;
  double stage_time_ = 0.0;
  JointVector hold_ = default_joint_pose();
  JumpTuning tune_;
  double origin_ground_ = 0.0;  // launch terrain height
  double last_frac_ = 1.0;      // effort commanded on the previous tick
  double best_outcome_ = 0.0;   // peak predicted outcome seen this stroke
  Eigen::Vector2d jump_origin_xy_ = Eigen::Vector2d::Zero();
  Eigen::Vector3d prev_velocity_ = Eigen::Vector3d::Zero();
};

// Scripted reaction-mass reorientation. In flight the total angular momentum
// is conserved, so the body rate is whatever the legs are not carrying:
// omega = I^-1 (h_body - A qdot). Each tick the controller solves for leg
// rates that realize a commanded body rate along the error axis, A qdot =
// h_body - I omega_des; with the body at the reference and nonzero momentum
// this keeps the legs spinning to park the momentum while the body stays
// still. Joints are weighted by their remaining travel toward the limit they
// are heading for, so the allocation shifts away from joints that are about
// to saturate. The pose is frozen only when both the error and the momentum
// are negligible (zero-momentum flight).
class OracleAttitudeController : public Controller {
 public:
  explicit OracleAttitudeController(const SimConfig& cfg)
      : geom_(cfg.geom), body_(cfg.body), tick_(1.0 / cfg.control_rate),
        a_map_(leg_momentum_matrix(cfg.body)) {}

  JointVector targets(const RobotState& s, const CommandState& cmd) override {
    const QuaternionError qe = quaternion_error(s.orientation, cmd.reference_orientation);
    const Eigen::Vector3d h_body =
        s.orientation.conjugate() * angular_momentum_world(s, body_);
    if (qe.angle < freeze_angle_ && h_body.norm() < freeze_momentum_) {
      if (!frozen_) {
        frozen_ = true;
        hold_ = s.joints;
      }
      return hold_;
    }
    frozen_ = false;
    const double rate = std::min(gain_ * qe.angle, max_rate_);
    const Eigen::Vector3d omega_des = -rate * qe.axis;
    Eigen::Vector3d h_req = h_body - body_.body_inertia * omega_des;
    // The PD joint tracking realizes the commanded rates only approximately
    // (and nonlinearly, through torque saturation), so close the loop on the
    // measured leg momentum: carry over a fraction of last tick's shortfall.
    const Eigen::Vector3d h_leg_meas = a_map_ * s.joint_velocities;
    if (have_prev_) h_req += comp_gain_ * (h_cmd_prev_ - h_leg_meas);
    h_cmd_prev_ = h_req;
    have_prev_ = true;
    // Two-pass weighted least squares: solve once to learn each joint's
    // direction of travel, then deweight joints short on headroom that way.
    JointVector theta_dot = solve(h_req, JointVector::Ones());
    JointVector w;
    for (int j = 0; j < kNumJoints; ++j) {
      const double span = geom_.limit_upper(j) - geom_.limit_lower(j);
      const double head = theta_dot[j] >= 0.0 ? geom_.limit_upper(j) - s.joints[j]
                                              : s.joints[j] - geom_.limit_lower(j);
      w[j] = std::clamp(head / (0.2 * span), 1e-3, 1.0);
    }
    theta_dot = solve(h_req, w);
    const double peak = theta_dot.cwiseAbs().maxCoeff();
    if (peak > max_joint_rate_) theta_dot *= max_joint_rate_ / peak;
    const JointVector target = s.joints + theta_dot * lookahead_;
    return safety_filter(target, geom_);
  }

  TaskKind task() const override { return TaskKind::AttitudeControl; }

  void reset() {
    frozen_ = false;
    have_prev_ = false;
  }

 private:
  JointVector solve(const Eigen::Vector3d& h_req, const JointVector& w) const {
    const Eigen::Matrix<double, 3, 12> aw = a_map_ * w.asDiagonal();
    const Eigen::Matrix3d gram = aw * a_map_.transpose();
    return w.asDiagonal() * a_map_.transpose() *
           gram.ldlt().solve(h_req);
  }

  LegGeometry geom_;
  BodyGeometry body_;
  double tick_;
  Eigen::Matrix<double, 3, 12> a_map_;
  double gain_ = 3.0;           // 1/s on the error angle
  double max_rate_ = 1.2;       // rad/s
  double max_joint_rate_ = 8.0; // rad/s leg pumping cap
  double lookahead_ = 0.065;    // s of commanded joint motion (PD tracking gain inverse)
  double freeze_angle_ = deg2rad(3.0);
  double freeze_momentum_ = 0.05;  // N m s
  double comp_gain_ = 0.6;      // leg-momentum shortfall carryover
  bool frozen_ = false;
  bool have_prev_ = false;
  Eigen::Vector3d h_cmd_prev_ = Eigen::Vector3d::Zero();
  JointVector hold_ = default_joint_pose();
};

// --- Mission runner -----------------------------------------------------------

struct JumpRecord {
  int waypoint = -1;
  MissionMode mode = MissionMode::VerticalJump;
  double target = 0.0;    // apogee above launch ground (vertical) or distance (forward)
  double achieved = 0.0;
  double error = 0.0;     // |achieved - target| (vertical apogee) or landing distance error
};

struct MissionResult {
  bool completed = false;
  double duration = 0.0;
  int waypoints_reached = 0;
  std::vector<JumpRecord> jumps;
  std::vector<std::string> phase_trace;  // "t phase waypoint" on each transition
  Trajectory trajectory;
  std::vector<MissionPhase> phase_per_step;
  std::vector<PolicyKind> policy_per_step;
};

// Runs the FSM plus scripted controllers in the reduced-order sim.
// Watchdog: cfg.watchdog seconds per waypoint, surfaced as MissionTimeout.
inline MissionResult run_mission(const MissionPlan& plan, const SimConfig& sim_in,
                                 const FsmConfig& fsm_cfg = FsmConfig{},
                                 bool record_trajectory = true) {
  SimConfig sim = sim_in;
  sim.env = plan.env;
  sim.terrain = plan.terrain;

  MissionResult result;
  RobotState s;
  if (!plan.waypoints.empty()) {
    // Start standing at the first waypoint's terrain level at the origin.
    s.position = Eigen::Vector3d(0.0, 0.0, plan.terrain.height_at(0.0) + stance_height(sim.geom));
  }

  OracleWalkController walk(sim);
  OracleJumpController vjump(sim, PolicyKind::VerticalJump);
  OracleJumpController fjump(sim, PolicyKind::ForwardJump);
  OracleAttitudeController attitude(sim);

  FsmState fsm;
  const double tick = 1.0 / sim.control_rate;
  double next_tick = 0.0;
  double waypoint_clock = 0.0;
  int last_waypoint = 0;
  MissionPhase last_phase = MissionPhase::Walking;
  result.phase_trace.push_back("0.000 walking 0");

  JointVector held = default_joint_pose();
  TaskKind held_task = TaskKind::Walking;
  PolicyKind held_policy = PolicyKind::Walking;

  // Per-jump bookkeeping.
  double jump_launch_ground = 0.0;
  EpisodeStats jump_stats;
  bool tracking_jump = false;

  const long max_steps =
      static_cast<long>(fsm_cfg.watchdog * static_cast<double>(plan.waypoints.size()) / sim.dt) + 1;
  for (long i = 0; i < max_steps; ++i) {
    if (s.time + 1e-12 >= next_tick) {
      const FsmOutput fo = fsm_step(fsm, s, plan, fsm_cfg, tick);

      // Transition bookkeeping.
      if (fo.fsm.phase != last_phase || fo.fsm.waypoint != last_waypoint) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3f %s %d", s.time,
                      mission_phase_name(fo.fsm.phase).c_str(), fo.fsm.waypoint);
        result.phase_trace.emplace_back(buf);

        if (last_phase == MissionPhase::FlightAttitude &&
            fo.fsm.phase == MissionPhase::LandingHandback) {
          (plan.waypoints[fo.fsm.waypoint].mode == MissionMode::VerticalJump ? vjump : fjump)
              .notify_landing(s);
        }
        if (fo.fsm.phase == MissionPhase::StanceStabilize && last_phase == MissionPhase::Walking) {
          vjump.reset();
          fjump.reset();
          attitude.reset();
        }
        if (fo.fsm.waypoint != last_waypoint) {
          waypoint_clock = 0.0;
          if (tracking_jump) {
            // Close out the jump record.
            JumpRecord rec;
            rec.waypoint = last_waypoint;
            const Waypoint& wp = plan.waypoints[last_waypoint];
            rec.mode = wp.mode;
            if (wp.mode == MissionMode::VerticalJump) {
              rec.target = wp.param;
              rec.achieved = jump_stats.max_height - jump_launch_ground;
              rec.error = std::abs(rec.achieved - rec.target);
            } else {
              rec.target = wp.param;
              const Eigen::Vector2d land_err =
                  s.position.head<2>() - Eigen::Vector2d(wp.x, wp.y);
              rec.achieved = rec.target - land_err.norm();
              rec.error = land_err.norm();
            }
            result.jumps.push_back(rec);
            tracking_jump = false;
          }
        }
        if (fo.fsm.phase == MissionPhase::JumpTakeoff && last_phase == MissionPhase::StanceStabilize) {
          tracking_jump = true;
          jump_launch_ground = plan.terrain.height_at(s.position.x(), s.position.y());
          jump_stats = EpisodeStats{};
        }
        last_phase = fo.fsm.phase;
        last_waypoint = fo.fsm.waypoint;
      }
      fsm = fo.fsm;
      if (fsm.complete()) {
        result.completed = true;
        result.duration = s.time;
        result.waypoints_reached = static_cast<int>(plan.waypoints.size());
        return result;
      }

      Controller* active = &walk;
      switch (fo.policy) {
        case PolicyKind::Walking: active = &walk; break;
        case PolicyKind::VerticalJump: active = &vjump; break;
        case PolicyKind::ForwardJump: active = &fjump; break;
        case PolicyKind::AttitudeControl: active = &attitude; break;
      }
      // Stance phases use the walk controller with zero commands (exact hold).
      if (fsm.phase == MissionPhase::StanceStabilize || fsm.phase == MissionPhase::Recovery) {
        active = &walk;
      }
      held = active->targets(s, fo.cmd);
      held_task = active->task();
      held_policy = fo.policy;
      next_tick += tick;
    }

    StepInfo info;
    s = step(s, held, sim, held_task, &info);
    if (tracking_jump) jump_stats.observe(s);
    waypoint_clock += sim.dt;
    if (waypoint_clock > fsm_cfg.watchdog) {
      throw MissionTimeout("waypoint " + std::to_string(fsm.waypoint) + " exceeded " +
                           std::to_string(fsm_cfg.watchdog) + " s");
    }
    if (record_trajectory) {
      result.trajectory.points.push_back({s, info.applied_torque, std::nullopt});
      result.phase_per_step.push_back(fsm.phase);
      result.policy_per_step.push_back(held_policy);
    }
  }
  throw MissionTimeout("mission exceeded the global step budget");
}

}  // namespace lowg
