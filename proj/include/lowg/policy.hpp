#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "lowg/actuation.hpp"
#include "lowg/quat.hpp"
#include "lowg/state.hpp"
#include "lowg/types.hpp"

namespace lowg {

enum class PolicyKind { AttitudeControl, Walking, VerticalJump, ForwardJump };

inline std::string policy_kind_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::AttitudeControl: return "attitude";
    case PolicyKind::Walking: return "walking";
    case PolicyKind::VerticalJump: return "vertical_jump";
    default: return "forward_jump";
  }
}

inline PolicyKind policy_kind_from_name(const std::string& name) {
  if (name == "attitude") return PolicyKind::AttitudeControl;
  if (name == "walking") return PolicyKind::Walking;
  if (name == "vertical_jump") return PolicyKind::VerticalJump;
  if (name == "forward_jump") return PolicyKind::ForwardJump;
  throw ValidationError("unknown policy kind: " + name);
}

inline TaskKind task_for_policy(PolicyKind k) {
  switch (k) {
    case PolicyKind::AttitudeControl: return TaskKind::AttitudeControl;
    case PolicyKind::Walking: return TaskKind::Walking;
    case PolicyKind::VerticalJump: return TaskKind::VerticalJump;
    default: return TaskKind::ForwardJump;
  }
}

// Hidden-layer widths per policy head.
inline std::vector<int> policy_hidden_sizes(PolicyKind k) {
  switch (k) {
    case PolicyKind::AttitudeControl: return {512, 256, 128};
    case PolicyKind::Walking: return {256, 128, 128};
    case PolicyKind::VerticalJump: return {256, 128, 128};
    default: return {128, 128, 128};
  }
}

// Observation layout: the common block is [q_err(4), omega_body(3),
// joints(12), joint_rates(12), prev_action(12)]; each policy appends its
// command fields.
inline constexpr int kCommonObsDim = 43;

inline int policy_observation_dim(PolicyKind k) {
  switch (k) {
    case PolicyKind::AttitudeControl: return kCommonObsDim;
    case PolicyKind::Walking: return kCommonObsDim + 3;   // c_xy, yaw rate
    case PolicyKind::VerticalJump: return kCommonObsDim + 1;  // target apogee
    default: return kCommonObsDim + 2;  // target landing xy
  }
}

inline constexpr int kActionDim = 12;

struct ObservationField {
  std::string name;
  int offset;
  int size;
};

inline std::vector<ObservationField> observation_layout(PolicyKind k) {
  std::vector<ObservationField> f{{"orientation_error_quat", 0, 4},
                                  {"angular_velocity_body", 4, 3},
                                  {"joint_positions", 7, 12},
                                  {"joint_velocities", 19, 12},
                                  {"previous_action", 31, 12}};
  switch (k) {
    case PolicyKind::Walking:
      f.push_back({"commanded_velocity_xy", 43, 2});
      f.push_back({"commanded_yaw_rate", 45, 1});
      break;
    case PolicyKind::VerticalJump:
      f.push_back({"target_apogee", 43, 1});
      break;
    case PolicyKind::ForwardJump:
      f.push_back({"target_landing_xy", 43, 2});
      break;
    default:
      break;
  }
  return f;
}

inline Eigen::VectorXd assemble_observation(PolicyKind k, const RobotState& s,
                                            const CommandState& cmd,
                                            const JointVector& prev_action) {
  Eigen::VectorXd obs(policy_observation_dim(k));
  const QuaternionError qe = quaternion_error(s.orientation, cmd.reference_orientation);
  obs[0] = qe.error.w();
  obs[1] = qe.error.x();
  obs[2] = qe.error.y();
  obs[3] = qe.error.z();
  obs.segment<3>(4) = s.omega_body;
  obs.segment<12>(7) = s.joints;
  obs.segment<12>(19) = s.joint_velocities;
  obs.segment<12>(31) = prev_action;
  switch (k) {
    case PolicyKind::Walking:
      obs.segment<2>(43) = cmd.commanded_velocity_xy;
      obs[45] = cmd.yaw_rate;
      break;
    case PolicyKind::VerticalJump:
      obs[43] = cmd.target_height;
      break;
    case PolicyKind::ForwardJump:
      obs.segment<2>(43) = cmd.target_landing_xy - s.position.head<2>();
      break;
    default:
      break;
  }
  return obs;
}

// Dense feed-forward network: ELU hidden activations, tanh output.
struct PolicyWeights {
  PolicyKind kind = PolicyKind::Walking;
  std::vector<Eigen::MatrixXd> w;  // layer weight matrices, rows = outputs
  std::vector<Eigen::VectorXd> b;

  int input_dim() const { return w.empty() ? 0 : static_cast<int>(w.front().cols()); }
  int output_dim() const { return w.empty() ? 0 : static_cast<int>(w.back().rows()); }

  void validate() const {
    if (w.size() != b.size() || w.empty()) {
      throw ShapeMismatch("weight/bias layer count mismatch");
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i].rows() != b[i].size()) {
        throw ShapeMismatch("bias size does not match layer " + std::to_string(i));
      }
      if (i > 0 && w[i].cols() != w[i - 1].rows()) {
        throw ShapeMismatch("layer " + std::to_string(i) + " input width mismatch");
      }
    }
    if (input_dim() != policy_observation_dim(kind)) {
      throw ShapeMismatch("input width does not match the observation layout");
    }
    if (output_dim() != kActionDim) {
      throw ShapeMismatch("output width is not the action dimension");
    }
  }
};

inline double elu(double x) { return x >= 0.0 ? x : std::expm1(x); }

inline Eigen::VectorXd mlp_forward(const PolicyWeights& net, const Eigen::VectorXd& obs) {
  if (net.w.empty()) throw ShapeMismatch("empty network");
  if (obs.size() != net.w.front().cols()) {
    throw ShapeMismatch("observation size " + std::to_string(obs.size()) +
                        " does not match network input " +
                        std::to_string(net.w.front().cols()));
  }
  Eigen::VectorXd x = obs;
  for (std::size_t i = 0; i < net.w.size(); ++i) {
    if (i > 0 && x.size() != net.w[i].cols()) {
      throw ShapeMismatch("layer " + std::to_string(i) + " input width mismatch");
    }
    x = (net.w[i] * x + net.b[i]).eval();
    if (i + 1 < net.w.size()) {
      x = x.unaryExpr([](double v) { return elu(v); });
    } else {
      x = x.array().tanh().matrix();
    }
  }
  return x;
}

// Per-joint action scale in radians about the default pose.
inline JointVector action_scale(PolicyKind k) {
  JointVector s;
  for (int j = 0; j < kNumJoints; ++j) {
    switch (k) {
      case PolicyKind::Walking: s[j] = deg2rad(60.0); break;
      case PolicyKind::AttitudeControl: s[j] = deg2rad(90.0); break;
      default: s[j] = is_lateral(j) ? deg2rad(15.0) : deg2rad(90.0); break;
    }
  }
  return s;
}

inline JointVector rescale_action(PolicyKind k, const Eigen::VectorXd& action) {
  if (action.size() != kActionDim) throw ShapeMismatch("action is not 12-dimensional");
  const JointVector scale = action_scale(k);
  JointVector target = default_joint_pose();
  for (int j = 0; j < kNumJoints; ++j) target[j] += scale[j] * action[j];
  return target;
}

// Attitude near-target blending: inside the 5 degree error band the policy
// action is faded linearly into the default pose so the hold is exact.
inline JointVector near_target_interpolation(const JointVector& policy_target, double error_angle,
                                             double band = deg2rad(5.0)) {
  const double lambda = std::clamp(error_angle / band, 0.0, 1.0);
  const JointVector def = default_joint_pose();
  return def + lambda * (policy_target - def);
}

// --- Weight file format -----------------------------------------------------
// Plain text: a "LOWG-POLICY v1" magic line, the policy kind, the layer
// count, then per layer its dimensions followed by row-major weights and the
// bias, all whitespace-separated with full double precision.

inline void save_policy(const PolicyWeights& net, std::ostream& os) {
  os << "LOWG-POLICY v1\n" << policy_kind_name(net.kind) << "\n" << net.w.size() << "\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < net.w.size(); ++i) {
    os << net.w[i].rows() << " " << net.w[i].cols() << "\n";
    for (Eigen::Index r = 0; r < net.w[i].rows(); ++r) {
      for (Eigen::Index c = 0; c < net.w[i].cols(); ++c) {
        os << net.w[i](r, c) << (c + 1 == net.w[i].cols() ? '\n' : ' ');
      }
    }
    for (Eigen::Index r = 0; r < net.b[i].size(); ++r) {
      os << net.b[i][r] << (r + 1 == net.b[i].size() ? '\n' : ' ');
    }
  }
}

inline void save_policy(const PolicyWeights& net, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open " + path + " for writing");
  save_policy(net, os);
}

inline PolicyWeights load_policy(std::istream& is) {
  std::string magic, version;
  is >> magic >> version;
  if (magic != "LOWG-POLICY") throw ParseError("not a policy file: bad magic");
  if (version != "v1") throw ParseError("unsupported policy file version: " + version);
  std::string kind;
  is >> kind;
  PolicyWeights net;
  net.kind = policy_kind_from_name(kind);
  std::size_t layers = 0;
  is >> layers;
  if (!is || layers == 0 || layers > 64) throw ParseError("bad layer count");
  for (std::size_t i = 0; i < layers; ++i) {
    Eigen::Index rows = 0, cols = 0;
    is >> rows >> cols;
    if (!is || rows <= 0 || cols <= 0 || rows > 8192 || cols > 8192) {
      throw ParseError("bad layer dimensions");
    }
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) is >> w(r, c);
    }
    Eigen::VectorXd b(rows);
    for (Eigen::Index r = 0; r < rows; ++r) is >> b[r];
    if (!is) throw ParseError("truncated policy file");
    net.w.push_back(std::move(w));
    net.b.push_back(std::move(b));
  }
  net.validate();
  return net;
}

inline PolicyWeights load_policy(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open " + path);
  return load_policy(is);
}

// Deterministic weight initialization for synthetic networks (tests, demos).
inline PolicyWeights make_policy(PolicyKind k, std::uint64_t seed = 0) {
  PolicyWeights net;
  net.kind = k;
  std::vector<int> dims{policy_observation_dim(k)};
  for (int h : policy_hidden_sizes(k)) dims.push_back(h);
  dims.push_back(kActionDim);
  std::uint64_t x = seed * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull;
  auto next = [&x]() {
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    const std::uint64_t r = x * 0x2545F4914F6CDD1Dull;
    return (static_cast<double>(r >> 11) * 0x1.0p-53) * 2.0 - 1.0;
  };
  for (std::size_t i = 1; i < dims.size(); ++i) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(dims[i - 1]));
    Eigen::MatrixXd w(dims[i], dims[i - 1]);
    Eigen::VectorXd b(dims[i]);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = scale * next();
      b[r] = 0.1 * scale * next();
    }
    net.w.push_back(std::move(w));
    net.b.push_back(std::move(b));
  }
  return net;
}

// One controller tick: observation assembly, inference, rescaling, attitude
// near-target blending, then the safety filter.
struct ControlRuntime {
  PolicyWeights net;
  LegGeometry geom;
  JointVector prev_action = JointVector::Zero();

  JointVector tick(const RobotState& s, const CommandState& cmd) {
    const Eigen::VectorXd obs = assemble_observation(net.kind, s, cmd, prev_action);
    const Eigen::VectorXd action = mlp_forward(net, obs);
    prev_action = action;
    JointVector target = rescale_action(net.kind, action);
    if (net.kind == PolicyKind::AttitudeControl) {
      const QuaternionError qe = quaternion_error(s.orientation, cmd.reference_orientation);
      target = near_target_interpolation(target, qe.angle);
    }
    return safety_filter(target, geom);
  }
};

// Human-readable structure description (used by the CLI).
inline std::string describe_policy(const PolicyWeights& net) {
  std::ostringstream os;
  os << "policy: " << policy_kind_name(net.kind) << "\n";
  os << "observation dim: " << policy_observation_dim(net.kind) << "\n";
  os << "action dim: " << kActionDim << "\n";
  os << "layout:\n";
  for (const auto& f : observation_layout(net.kind)) {
    os << "  [" << f.offset << ".." << (f.offset + f.size - 1) << "] " << f.name << "\n";
  }
  os << "layers:\n";
  std::size_t params = 0;
  for (std::size_t i = 0; i < net.w.size(); ++i) {
    const char* act = i + 1 < net.w.size() ? "elu" : "tanh";
    os << "  dense " << net.w[i].cols() << " -> " << net.w[i].rows() << " (" << act << ")\n";
    params += static_cast<std::size_t>(net.w[i].size()) + static_cast<std::size_t>(net.b[i].size());
  }
  os << "parameters: " << params << "\n";
  return os.str();
}

}  // namespace lowg
