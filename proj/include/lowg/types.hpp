#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>
#include <string>

namespace lowg {

// 12-joint vector, ordered (FL, FR, BL, BR) x (lateral, inner-transversal,
// outer-transversal). This ordering is a contract shared by every module.
using JointVector = Eigen::Matrix<double, 12, 1>;

inline constexpr int kNumLegs = 4;
inline constexpr int kJointsPerLeg = 3;
inline constexpr int kNumJoints = 12;

enum class Leg { FL = 0, FR = 1, BL = 2, BR = 3 };
enum class JointRole { Lateral = 0, InnerTransversal = 1, OuterTransversal = 2 };

inline int joint_index(int leg, JointRole role) {
  return leg * kJointsPerLeg + static_cast<int>(role);
}

inline bool is_lateral(int joint) { return joint % kJointsPerLeg == 0; }

inline constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

struct ClosureUnreachable : std::runtime_error {
  explicit ClosureUnreachable(const std::string& what) : std::runtime_error(what) {}
};

struct SingularConfiguration : std::runtime_error {
  explicit SingularConfiguration(const std::string& what) : std::runtime_error(what) {}
};

struct ShapeMismatch : std::runtime_error {
  explicit ShapeMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct NeverLands : std::runtime_error {
  explicit NeverLands(const std::string& what) : std::runtime_error(what) {}
};

struct InfeasibleTarget : std::runtime_error {
  explicit InfeasibleTarget(const std::string& what) : std::runtime_error(what) {}
};

struct NumericalDivergence : std::runtime_error {
  explicit NumericalDivergence(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

struct MissionTimeout : std::runtime_error {
  explicit MissionTimeout(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lowg
