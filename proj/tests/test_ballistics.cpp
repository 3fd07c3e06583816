#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lowg/ballistics.hpp"

using namespace lowg;

namespace {

// Independent RK4 integration of the point-mass ballistic arc; returns the
// landing position and time found by bisecting the crossing step.
struct ArcResult {
  Eigen::Vector3d p;
  double t;
};

ArcResult rk4_land(Eigen::Vector3d p, Eigen::Vector3d v, double ground_z, double g) {
  // State (p, v), dynamics (v, -g e_z). Gravity is constant, so RK4 is exact
  // up to roundoff, but we integrate anyway as an independent method.
  const double dt = 1e-4;
  double t = 0.0;
  auto step = [&](Eigen::Vector3d& pp, Eigen::Vector3d& vv, double h) {
    const Eigen::Vector3d a(0.0, 0.0, -g);
    // k1..k4 for position are v, v + a h/2, v + a h/2, v + a h.
    pp += h * (vv + h / 2.0 * a);
    vv += h * a;
  };
  // Make sure we are past the apogee before testing the crossing so launches
  // from below ground_z (e.g. rising through it) are not caught on the way up.
  bool was_above = p.z() > ground_z;
  for (int i = 0; i < 40000000; ++i) {
    Eigen::Vector3d pn = p, vn = v;
    step(pn, vn, dt);
    if (was_above && pn.z() <= ground_z) {
      // Bisect inside the step.
      double lo = 0.0, hi = dt;
      for (int b = 0; b < 80; ++b) {
        const double mid = 0.5 * (lo + hi);
        Eigen::Vector3d pm = p, vm = v;
        step(pm, vm, mid);
        (pm.z() > ground_z ? lo : hi) = mid;
      }
      Eigen::Vector3d pm = p, vm = v;
      step(pm, vm, 0.5 * (lo + hi));
      return {pm, t + 0.5 * (lo + hi)};
    }
    was_above = was_above || pn.z() > ground_z;
    p = pn;
    v = vn;
    t += dt;
  }
  throw std::runtime_error("rk4_land: no crossing");
}

double rk4_apogee(double p_z, double v_z, double g) {
  const double dt = 1e-5;
  double best = p_z;
  for (int i = 0; i < 4000000; ++i) {
    p_z += dt * (v_z - 0.5 * g * dt);
    v_z -= g * dt;
    best = std::max(best, p_z);
    if (v_z < -1.0) break;
  }
  return best;
}

}  // namespace

TEST_CASE("gravity presets") {
  CHECK(GravityEnv::mars().g == doctest::Approx(3.71));
  CHECK(GravityEnv::moon().g == doctest::Approx(1.62));
  CHECK(GravityEnv::earth().g == doctest::Approx(9.81));
}

TEST_CASE("apogee of a known launch") {
  // v_z = 4.796040033194052 m/s from z = 0.0 on Mars peaks at 3.1 m.
  const GravityEnv env = GravityEnv::mars();
  CHECK(estimate_apogee(0.0, 4.796040033194052, env) == doctest::Approx(3.1).epsilon(1e-12));
  CHECK(estimate_apogee(0.5, 4.796, env) == doctest::Approx(3.599948247978437).epsilon(1e-12));
}

TEST_CASE("descending states report their current height as apogee bound") {
  const GravityEnv env = GravityEnv::mars();
  CHECK(estimate_apogee(2.0, -3.0, env) == doctest::Approx(2.0));
  CHECK(estimate_apogee(2.0, 0.0, env) == doctest::Approx(2.0));
}

TEST_CASE("apogee matches the RK4 oracle") {
  const GravityEnv env = GravityEnv::mars();
  for (double vz : {0.5, 1.7, 3.3, 4.8}) {
    CHECK(estimate_apogee(0.42, vz, env) ==
          doctest::Approx(rk4_apogee(0.42, vz, env.g)).epsilon(1e-7));
  }
}

TEST_CASE("landing point matches the RK4 oracle") {
  const GravityEnv env = GravityEnv::mars();
  const Eigen::Vector3d p(0.2, -0.1, 1.4);
  const Eigen::Vector3d v(2.1, 0.4, 3.0);
  const LandingEstimate est = estimate_landing_point(p, v, 0.0, env);
  const ArcResult oracle = rk4_land(p, v, 0.0, env.g);
  CHECK(est.time_to_land == doctest::Approx(oracle.t).epsilon(1e-6));
  CHECK(est.xy.x() == doctest::Approx(oracle.p.x()).epsilon(1e-6));
  CHECK(est.xy.y() == doctest::Approx(oracle.p.y()).epsilon(1e-6));
}

TEST_CASE("landing on a raised platform") {
  const GravityEnv env = GravityEnv::mars();
  const Eigen::Vector3d p(0.0, 0.0, 0.5);
  const Eigen::Vector3d v(3.0, 0.0, 4.0);
  const LandingEstimate est = estimate_landing_point(p, v, 1.1, env);
  const ArcResult oracle = rk4_land(p, v, 1.1, env.g);
  CHECK(est.time_to_land == doctest::Approx(oracle.t).epsilon(1e-6));
  CHECK(est.xy.x() == doctest::Approx(oracle.p.x()).epsilon(1e-6));
}

TEST_CASE("arc that never reaches the requested level throws") {
  const GravityEnv env = GravityEnv::mars();
  // Apogee 0.5 + 1^2 / (2 * 3.71) ~ 0.635 m, ground at 2 m.
  CHECK_THROWS_AS(
      estimate_landing_point({0.0, 0.0, 0.5}, {1.0, 0.0, 1.0}, 2.0, env), NeverLands);
}

TEST_CASE("descending start below the level throws") {
  const GravityEnv env = GravityEnv::mars();
  CHECK_THROWS_AS(
      estimate_landing_point({0.0, 0.0, 0.5}, {1.0, 0.0, -1.0}, 1.0, env), NeverLands);
}

TEST_CASE("rsi sampling is deterministic in the seed") {
  const LegGeometry geom;
  const GravityEnv env = GravityEnv::mars();
  RsiConfig cfg;
  CommandState cmd;
  cmd.target_height = 2.3;
  const RobotState a = rsi_sample(JumpPhase::InFlight, cmd, env, 99, cfg, geom);
  const RobotState b = rsi_sample(JumpPhase::InFlight, cmd, env, 99, cfg, geom);
  const RobotState c = rsi_sample(JumpPhase::InFlight, cmd, env, 100, cfg, geom);
  CHECK((a.position - b.position).norm() == doctest::Approx(0.0));
  CHECK((a.velocity - b.velocity).norm() == doctest::Approx(0.0));
  CHECK(a.orientation.coeffs() == b.orientation.coeffs());
  CHECK((a.position - c.position).norm() > 0.0);
}

TEST_CASE("standing and squatting samples are grounded") {
  const LegGeometry geom;
  const GravityEnv env = GravityEnv::mars();
  RsiConfig cfg;
  CommandState cmd;
  cmd.target_height = 2.0;
  const RobotState st = rsi_sample(JumpPhase::Standing, cmd, env, 1, cfg, geom);
  CHECK(st.all_contact());
  CHECK(st.position.z() == doctest::Approx(stance_height(geom)));
  const RobotState sq = rsi_sample(JumpPhase::Squatting, cmd, env, 1, cfg, geom);
  CHECK(sq.all_contact());
  CHECK(sq.position.z() < st.position.z());
  CHECK(sq.joints[1] == doctest::Approx(cfg.squat_angle));
}

TEST_CASE("in-flight vertical samples lie on the target arc") {
  const LegGeometry geom;
  const GravityEnv env = GravityEnv::mars();
  RsiConfig cfg;
  CommandState cmd;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    cmd.target_height = 1.8 + 0.005 * static_cast<double>(seed);
    const RobotState s = rsi_sample(JumpPhase::InFlight, cmd, env, seed, cfg, geom);
    CHECK(!s.any_contact());
    // Specific mechanical energy along the arc equals the apogee's.
    const double e = s.position.z() + s.velocity.z() * s.velocity.z() / (2.0 * env.g);
    CHECK(e == doctest::Approx(cmd.target_height).epsilon(1e-9));
    CHECK(s.velocity.head<2>().norm() == doctest::Approx(0.0));
  }
}

TEST_CASE("pre-touchdown samples are within the touchdown window") {
  const LegGeometry geom;
  const GravityEnv env = GravityEnv::mars();
  RsiConfig cfg;
  CommandState cmd;
  cmd.target_height = 2.5;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const RobotState s = rsi_sample(JumpPhase::PreTouchdown, cmd, env, seed, cfg, geom);
    CHECK(s.velocity.z() < 0.0);
    const double t_left =
        estimate_landing_point(s.position, s.velocity, stance_height(geom), env).time_to_land;
    CHECK(t_left <= cfg.pre_touchdown_window + 1e-9);
  }
}

TEST_CASE("forward samples follow a 45-degree arc to the commanded landing") {
  const LegGeometry geom;
  const GravityEnv env = GravityEnv::mars();
  RsiConfig cfg;
  cfg.vertical = false;
  CommandState cmd;
  cmd.target_landing_xy = Eigen::Vector2d(3.0, 0.0);
  cmd.target_ground_z = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const RobotState s = rsi_sample(JumpPhase::InFlight, cmd, env, seed, cfg, geom);
    // Replaying the remaining arc lands at the commanded point (same level).
    const LandingEstimate est =
        estimate_landing_point(s.position, s.velocity, stance_height(geom), env);
    CHECK(est.xy.x() == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(est.xy.y() == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("infeasible targets are rejected") {
  const LegGeometry geom;
  const GravityEnv env = GravityEnv::mars();
  RsiConfig cfg;
  CommandState cmd;
  cmd.target_height = 0.1;  // below stance height
  CHECK_THROWS_AS(rsi_sample(JumpPhase::InFlight, cmd, env, 5, cfg, geom), InfeasibleTarget);
  cmd.target_height = 100.0;  // beyond the takeoff speed cap
  CHECK_THROWS_AS(rsi_sample(JumpPhase::InFlight, cmd, env, 5, cfg, geom), InfeasibleTarget);
  cfg.vertical = false;
  cmd.target_landing_xy = Eigen::Vector2d(1.0, 0.0);
  cmd.target_ground_z = 1.5;  // ledge higher than a 45-degree arc can clear
  CHECK_THROWS_AS(rsi_sample(JumpPhase::InFlight, cmd, env, 5, cfg, geom), InfeasibleTarget);
}

TEST_CASE("attitude initialization has zero total angular momentum") {
  const LegGeometry geom;
  const BodyGeometry body;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const RobotState s = rsi_sample_attitude(seed, geom, body);
    CHECK(angular_momentum_body(s, body).norm() < 1e-12);
    CHECK(angular_momentum_world(s, body).norm() < 1e-12);
    CHECK(std::abs(s.orientation.norm() - 1.0) < 1e-12);
    for (int j = 0; j < kNumJoints; ++j) {
      CHECK(s.joints[j] >= geom.limit_lower(j) - 1e-12);
      CHECK(s.joints[j] <= geom.limit_upper(j) + 1e-12);
    }
    for (int leg = 0; leg < kNumLegs; ++leg) {
      CHECK(coupling_violation(leg_angles(s.joints, leg), geom) == doctest::Approx(0.0));
    }
  }
}

TEST_CASE("attitude orientations cover the rotation group") {
  // Coarse uniformity check: the mean quaternion coefficients over many
  // samples vanish and no octant of the w-axis dominates.
  const LegGeometry geom;
  const BodyGeometry body;
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  int w_pos = 0;
  const int n = 2000;
  for (std::uint64_t seed = 0; seed < n; ++seed) {
    const RobotState s = rsi_sample_attitude(seed, geom, body);
    mean += s.orientation.coeffs();
    if (s.orientation.w() > 0) ++w_pos;
  }
  mean /= n;
  CHECK(mean.norm() < 0.05);
  CHECK(w_pos > n / 2 - 150);
  CHECK(w_pos < n / 2 + 150);
}
