#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "lowg/actuation.hpp"
#include "lowg/state.hpp"

using namespace lowg;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

// Brute-force Euclidean projection of a 2D point onto the box-and-coupling
// polygon: coarse grid scan refined around the best cell.
Eigen::Vector2d projection_oracle(const Eigen::Vector2d& p, const LegGeometry& g) {
  const double lo_i = g.joint_limits_lower[1], hi_i = g.joint_limits_upper[1];
  const double lo_o = g.joint_limits_lower[2], hi_o = g.joint_limits_upper[2];
  auto feasible = [&](double a, double b) {
    return a >= lo_i && a <= hi_i && b >= lo_o && b <= hi_o &&
           a + b >= g.coupling_lower && a + b <= g.coupling_upper;
  };
  Eigen::Vector2d best(0.5 * (lo_i + hi_i), 0.5 * (lo_o + hi_o));
  double best_d = (best - p).squaredNorm();
  double span_a = hi_i - lo_i, span_b = hi_o - lo_o;
  double ca = best.x(), cb = best.y();
  for (int level = 0; level < 8; ++level) {
    const int n = 60;
    Eigen::Vector2d local_best = best;
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j <= n; ++j) {
        const double a = ca - span_a / 2 + span_a * i / n;
        const double b = cb - span_b / 2 + span_b * j / n;
        if (!feasible(a, b)) continue;
        const double d = (Eigen::Vector2d(a, b) - p).squaredNorm();
        if (d < best_d) {
          best_d = d;
          local_best = {a, b};
        }
      }
    }
    best = local_best;
    ca = best.x();
    cb = best.y();
    span_a /= 10.0;
    span_b /= 10.0;
  }
  return best;
}

}  // namespace

TEST_CASE("pd torque") {
  MotorParams p;
  p.kp = 10.0;
  p.kd = 0.0;
  CHECK(pd_torque(1.0, 1.0, 0.0, p) == doctest::Approx(0.0));
  CHECK(pd_torque(1.5, 1.0, 0.0, p) == doctest::Approx(5.0));
  p.kp = 0.0;
  p.kd = 1.0;
  CHECK(pd_torque(0.0, 0.0, 2.0, p) == doctest::Approx(-2.0));
}

TEST_CASE("torque-speed saturation branches") {
  MotorParams p;
  p.tau_max = 24.8;
  p.theta_dot_cut = 15.75;
  p.theta_dot_no_load = 21.0;
  CHECK(saturate_torque(30.0, 0.0, p) == doctest::Approx(24.8).epsilon(1e-14));
  CHECK(saturate_torque(30.0, p.theta_dot_cut, p) == doctest::Approx(24.8).epsilon(1e-14));
  CHECK(saturate_torque(1e6, p.theta_dot_no_load, p) == doctest::Approx(0.0));
  CHECK(saturate_torque(-1e6, 50.0, p) == doctest::Approx(0.0));
  const double mid = 0.5 * (p.theta_dot_cut + p.theta_dot_no_load);
  CHECK(saturate_torque(1e6, mid, p) == doctest::Approx(p.tau_max / 2.0).epsilon(1e-14));
}

TEST_CASE("saturation is odd in desired torque and non-increasing in speed") {
  MotorParams p;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    const double tau = uniform(rng, -100.0, 100.0);
    const double w = uniform(rng, -30.0, 30.0);
    CHECK(saturate_torque(-tau, w, p) == doctest::Approx(-saturate_torque(tau, w, p)));
  }
  double prev = p.tau_max;
  for (double w = 0.0; w <= 25.0; w += 0.01) {
    const double lim = saturate_torque(1e6, w, p);
    CHECK(lim <= prev + 1e-12);
    prev = lim;
  }
}

TEST_CASE("braking constraint permits only dissipative torque above the safe speed") {
  const double safe = 10.0;
  CHECK(apply_braking_constraint(5.0, 3.0, safe) == doctest::Approx(5.0));
  CHECK(apply_braking_constraint(3.0, 15.0, safe) == doctest::Approx(0.0));
  CHECK(apply_braking_constraint(-3.0, 15.0, safe) == doctest::Approx(-3.0));
  CHECK(apply_braking_constraint(3.0, -15.0, safe) == doctest::Approx(3.0));
}

TEST_CASE("task torque caps") {
  MotorParams transversal;
  transversal.tau_max = 24.8;
  CHECK(task_torque_cap(15.0, TaskKind::Walking, transversal) == doctest::Approx(10.0));
  CHECK(task_torque_cap(-20.0, TaskKind::AttitudeControl, transversal) == doctest::Approx(-12.0));
  CHECK(task_torque_cap(20.0, TaskKind::VerticalJump, transversal) == doctest::Approx(20.0));
  CHECK(task_torque_cap(30.0, TaskKind::ForwardJump, transversal) == doctest::Approx(24.8));
}

TEST_CASE("safety filter is the identity on feasible input") {
  LegGeometry g;
  const JointVector q = default_joint_pose();
  CHECK((safety_filter(q, g) - q).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("safety filter clamps a single out-of-box joint") {
  LegGeometry g;
  JointVector q = default_joint_pose();
  q[0] = g.joint_limits_upper[0] + 0.3;
  const JointVector out = safety_filter(q, g);
  CHECK(out[0] == doctest::Approx(g.joint_limits_upper[0]));
  for (int j = 1; j < kNumJoints; ++j) CHECK(out[j] == doctest::Approx(q[j]));
}

TEST_CASE("coupling violation is resolved by an equal split") {
  LegGeometry g;
  JointVector q = default_joint_pose();
  const double u = g.coupling_upper;
  q[1] = u / 2.0 + 0.1;
  q[2] = u / 2.0 + 0.1;
  const JointVector out = safety_filter(q, g);
  CHECK(out[1] == doctest::Approx(q[1] - 0.1).epsilon(1e-12));
  CHECK(out[2] == doctest::Approx(q[2] - 0.1).epsilon(1e-12));
  CHECK(out[1] + out[2] == doctest::Approx(u).epsilon(1e-12));
}

TEST_CASE("coupling projection matches the numeric Euclidean projection oracle") {
  LegGeometry g;
  std::mt19937_64 rng(17);
  int done = 0;
  while (done < 20) {
    // Box-feasible transversal pair violating the coupling.
    const double ti = uniform(rng, g.joint_limits_lower[1], g.joint_limits_upper[1]);
    const double to = uniform(rng, g.joint_limits_lower[2], g.joint_limits_upper[2]);
    if (coupling_violation({0.0, ti, to}, g) == 0.0) continue;
    JointVector q = default_joint_pose();
    q[1] = ti;
    q[2] = to;
    const JointVector out = safety_filter(q, g);
    const Eigen::Vector2d oracle = projection_oracle({ti, to}, g);
    CHECK(std::abs(out[1] - oracle.x()) < 1e-6);
    CHECK(std::abs(out[2] - oracle.y()) < 1e-6);
    ++done;
  }
}

TEST_CASE("safety filter is idempotent") {
  LegGeometry g;
  std::mt19937_64 rng(23);
  for (int i = 0; i < 10000; ++i) {
    JointVector q;
    for (int j = 0; j < kNumJoints; ++j) q[j] = uniform(rng, -4.0, 5.0);
    const JointVector once = safety_filter(q, g);
    const JointVector twice = safety_filter(once, g);
    CHECK((twice - once).cwiseAbs().maxCoeff() < 1e-15);
    // And the output is feasible.
    for (int j = 0; j < kNumJoints; ++j) {
      CHECK(once[j] >= g.limit_lower(j) - 1e-15);
      CHECK(once[j] <= g.limit_upper(j) + 1e-15);
    }
    for (int leg = 0; leg < kNumLegs; ++leg) {
      CHECK(std::abs(coupling_violation(leg_angles(once, leg), g)) < 1e-12);
    }
  }
}

TEST_CASE("feasible configurations pass the safety filter unchanged") {
  LegGeometry g;
  std::mt19937_64 rng(29);
  for (int i = 0; i < 2000; ++i) {
    JointVector q;
    for (int j = 0; j < kNumJoints; ++j) {
      q[j] = uniform(rng, g.limit_lower(j), g.limit_upper(j));
    }
    bool feasible = true;
    for (int leg = 0; leg < kNumLegs; ++leg) {
      if (coupling_violation(leg_angles(q, leg), g) != 0.0) feasible = false;
    }
    if (!feasible) continue;
    CHECK((safety_filter(q, g) - q).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }
}

TEST_CASE("full torque pipeline never exceeds the torque-speed envelope") {
  ActuatorConfig cfg;
  std::mt19937_64 rng(31);
  for (int i = 0; i < 5000; ++i) {
    const int joint = static_cast<int>(rng() % kNumJoints);
    const MotorParams p = cfg.params_for(joint);
    const double target = uniform(rng, -3.0, 3.0);
    const double theta = uniform(rng, -3.0, 3.0);
    const double rate = uniform(rng, -30.0, 30.0);
    for (TaskKind task : {TaskKind::Walking, TaskKind::AttitudeControl, TaskKind::VerticalJump,
                          TaskKind::ForwardJump}) {
      const double tau = motor_torque(target, theta, rate, task, p, cfg.theta_dot_safe);
      CHECK(std::abs(tau) <= torque_speed_limit(rate, p) + 1e-12);
      CHECK(std::abs(tau) <= task_torque_limit(task, p) + 1e-12);
    }
  }
}
