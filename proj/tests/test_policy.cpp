#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "lowg/policy.hpp"

using namespace lowg;

TEST_CASE("network shapes per policy kind") {
  CHECK(policy_hidden_sizes(PolicyKind::AttitudeControl) == std::vector<int>{512, 256, 128});
  CHECK(policy_hidden_sizes(PolicyKind::Walking) == std::vector<int>{256, 128, 128});
  CHECK(policy_hidden_sizes(PolicyKind::VerticalJump) == std::vector<int>{256, 128, 128});
  CHECK(policy_hidden_sizes(PolicyKind::ForwardJump) == std::vector<int>{128, 128, 128});
  CHECK(policy_observation_dim(PolicyKind::AttitudeControl) == 43);
  CHECK(policy_observation_dim(PolicyKind::Walking) == 46);
  CHECK(policy_observation_dim(PolicyKind::VerticalJump) == 44);
  CHECK(policy_observation_dim(PolicyKind::ForwardJump) == 45);
}

TEST_CASE("observation layout is contiguous and complete") {
  for (PolicyKind k : {PolicyKind::AttitudeControl, PolicyKind::Walking,
                       PolicyKind::VerticalJump, PolicyKind::ForwardJump}) {
    int expected_offset = 0;
    for (const auto& f : observation_layout(k)) {
      CHECK(f.offset == expected_offset);
      expected_offset += f.size;
    }
    CHECK(expected_offset == policy_observation_dim(k));
  }
}

TEST_CASE("converged attitude observation has the identity quaternion slice") {
  RobotState s;
  CommandState cmd;
  const Eigen::VectorXd obs =
      assemble_observation(PolicyKind::AttitudeControl, s, cmd, JointVector::Zero());
  CHECK(obs[0] == doctest::Approx(1.0));
  CHECK(obs.segment<3>(1).norm() == doctest::Approx(0.0));
  CHECK(obs.segment<3>(4).norm() == doctest::Approx(0.0));
  // Default pose in the joint slice.
  CHECK(obs[7] == doctest::Approx(0.0));
  CHECK(obs[8] == doctest::Approx(deg2rad(45.0)));
  CHECK(obs.segment<12>(31).norm() == doctest::Approx(0.0));
}

TEST_CASE("task command slices land in the right fields") {
  RobotState s;
  CommandState cmd;
  cmd.commanded_velocity_xy = {0.4, -0.2};
  cmd.yaw_rate = 0.3;
  cmd.target_height = 2.6;
  cmd.target_landing_xy = {3.0, 1.0};
  s.position = {1.0, 0.5, 0.4};
  const JointVector prev = JointVector::Constant(0.1);
  const Eigen::VectorXd w = assemble_observation(PolicyKind::Walking, s, cmd, prev);
  CHECK(w[43] == doctest::Approx(0.4));
  CHECK(w[44] == doctest::Approx(-0.2));
  CHECK(w[45] == doctest::Approx(0.3));
  CHECK(w[31] == doctest::Approx(0.1));
  const Eigen::VectorXd v = assemble_observation(PolicyKind::VerticalJump, s, cmd, prev);
  CHECK(v[43] == doctest::Approx(2.6));
  const Eigen::VectorXd f = assemble_observation(PolicyKind::ForwardJump, s, cmd, prev);
  CHECK(f[43] == doctest::Approx(2.0));  // target minus current position
  CHECK(f[44] == doctest::Approx(0.5));
}

TEST_CASE("mlp forward: zero weights give zero action") {
  PolicyWeights net = make_policy(PolicyKind::Walking, 1);
  for (auto& w : net.w) w.setZero();
  for (auto& b : net.b) b.setZero();
  const Eigen::VectorXd out = mlp_forward(net, Eigen::VectorXd::Ones(46));
  CHECK(out.size() == 12);
  CHECK(out.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("mlp forward matches hand arithmetic on a tiny network") {
  // 2 -> 2 -> 1: hidden ELU, output tanh.
  PolicyWeights net;
  net.kind = PolicyKind::Walking;
  Eigen::MatrixXd w1(2, 2);
  w1 << 1.0, 0.0, 0.0, -1.0;
  Eigen::MatrixXd w2(1, 2);
  w2 << 0.5, 2.0;
  net.w = {w1, w2};
  net.b = {Eigen::Vector2d(0.0, 0.0), Eigen::VectorXd::Constant(1, 0.25)};
  Eigen::VectorXd in(2);
  in << 0.3, 0.4;
  // Hidden: [0.3, elu(-0.4)] = [0.3, e^-0.4 - 1]; out = tanh(0.5*0.3 + 2*(e^-0.4 - 1) + 0.25).
  const double h2 = std::exp(-0.4) - 1.0;
  const double expect = std::tanh(0.15 + 2.0 * h2 + 0.25);
  CHECK(mlp_forward(net, in)[0] == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("mlp output is always in [-1, 1]") {
  const PolicyWeights net = make_policy(PolicyKind::ForwardJump, 7);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd obs =
        Eigen::VectorXd::Random(policy_observation_dim(PolicyKind::ForwardJump)) * 10.0;
    const Eigen::VectorXd out = mlp_forward(net, obs);
    CHECK(out.cwiseAbs().maxCoeff() <= 1.0);
  }
}

TEST_CASE("shape mismatches are rejected") {
  PolicyWeights net = make_policy(PolicyKind::Walking, 1);
  CHECK_THROWS_AS(mlp_forward(net, Eigen::VectorXd::Zero(10)), ShapeMismatch);
  PolicyWeights bad = net;
  bad.b[1] = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(bad.validate(), ShapeMismatch);
  PolicyWeights wrong_out = net;
  wrong_out.w.back() = Eigen::MatrixXd::Zero(5, wrong_out.w.back().cols());
  wrong_out.b.back() = Eigen::VectorXd::Zero(5);
  CHECK_THROWS_AS(wrong_out.validate(), ShapeMismatch);
  net.validate();  // the unmodified network is fine
}

TEST_CASE("action rescaling offsets around the default pose") {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(12);
  const JointVector at_zero = rescale_action(PolicyKind::Walking, zero);
  CHECK(at_zero[0] == doctest::Approx(0.0));
  CHECK(at_zero[1] == doctest::Approx(deg2rad(45.0)));

  Eigen::VectorXd ones = Eigen::VectorXd::Ones(12);
  const JointVector walk = rescale_action(PolicyKind::Walking, ones);
  CHECK(walk[1] == doctest::Approx(deg2rad(105.0)));  // 45 + 60
  CHECK(walk[0] == doctest::Approx(deg2rad(60.0)));
  const JointVector att = rescale_action(PolicyKind::AttitudeControl, ones);
  CHECK(att[0] == doctest::Approx(deg2rad(90.0)));
  const JointVector jump = rescale_action(PolicyKind::VerticalJump, -ones);
  CHECK(jump[0] == doctest::Approx(deg2rad(-15.0)));
  CHECK(jump[1] == doctest::Approx(deg2rad(-45.0)));  // 45 - 90
}

TEST_CASE("action rescaling round-trips within 1e-12") {
  const PolicyKind kinds[] = {PolicyKind::AttitudeControl, PolicyKind::Walking,
                              PolicyKind::VerticalJump, PolicyKind::ForwardJump};
  for (PolicyKind k : kinds) {
    const Eigen::VectorXd a = Eigen::VectorXd::Random(12);
    const JointVector target = rescale_action(k, a);
    const JointVector def = default_joint_pose();
    const JointVector scale = action_scale(k);
    for (int j = 0; j < 12; ++j) {
      CHECK(std::abs((target[j] - def[j]) / scale[j] - a[j]) < 1e-12);
    }
  }
}

TEST_CASE("near-target interpolation is linear and continuous at the band edge") {
  JointVector cmd = default_joint_pose();
  cmd[1] += 0.4;
  const JointVector def = default_joint_pose();
  CHECK(near_target_interpolation(cmd, 0.0)[1] == doctest::Approx(def[1]));
  CHECK(near_target_interpolation(cmd, deg2rad(2.5))[1] ==
        doctest::Approx(def[1] + 0.2).epsilon(1e-12));
  CHECK(near_target_interpolation(cmd, deg2rad(5.0))[1] == doctest::Approx(cmd[1]));
  CHECK(near_target_interpolation(cmd, deg2rad(30.0))[1] == doctest::Approx(cmd[1]));
  // Dense continuity sweep across the band edge.
  double prev = near_target_interpolation(cmd, deg2rad(4.0))[1];
  for (double deg = 4.001; deg <= 6.0; deg += 0.001) {
    const double cur = near_target_interpolation(cmd, deg2rad(deg))[1];
    CHECK(std::abs(cur - prev) < 1e-3);
    prev = cur;
  }
}

TEST_CASE("weight files round-trip exactly") {
  const PolicyWeights net = make_policy(PolicyKind::VerticalJump, 42);
  std::stringstream ss;
  save_policy(net, ss);
  const PolicyWeights back = load_policy(ss);
  CHECK(back.kind == net.kind);
  REQUIRE(back.w.size() == net.w.size());
  for (std::size_t i = 0; i < net.w.size(); ++i) {
    CHECK((back.w[i] - net.w[i]).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK((back.b[i] - net.b[i]).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }
  // Inference agrees bit-for-bit.
  const Eigen::VectorXd obs = Eigen::VectorXd::Random(policy_observation_dim(net.kind));
  CHECK((mlp_forward(net, obs) - mlp_forward(back, obs)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("weight loader rejects bad headers and truncated files") {
  {
    std::stringstream ss("NOT-A-POLICY v1\n");
    CHECK_THROWS_AS(load_policy(ss), ParseError);
  }
  {
    std::stringstream ss("LOWG-POLICY v2\nwalking\n1\n");
    CHECK_THROWS_AS(load_policy(ss), ParseError);
  }
  {
    std::stringstream ss("LOWG-POLICY v1\nwalking\n1\n2 2\n1.0 2.0\n");
    CHECK_THROWS_AS(load_policy(ss), ParseError);
  }
  {
    std::stringstream ss("LOWG-POLICY v1\nnosuchkind\n1\n");
    CHECK_THROWS_AS(load_policy(ss), ValidationError);
  }
}

TEST_CASE("control tick with zero weights returns the filtered default pose") {
  ControlRuntime rt;
  rt.net = make_policy(PolicyKind::Walking, 3);
  for (auto& w : rt.net.w) w.setZero();
  for (auto& b : rt.net.b) b.setZero();
  RobotState s;
  CommandState cmd;
  const JointVector out = rt.tick(s, cmd);
  CHECK((out - default_joint_pose()).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("control tick output always satisfies limits and coupling") {
  ControlRuntime rt;
  rt.net = make_policy(PolicyKind::AttitudeControl, 11);
  RobotState s;
  CommandState cmd;
  cmd.reference_orientation = Quaternion(Eigen::AngleAxisd(1.2, Eigen::Vector3d::UnitX()));
  for (int i = 0; i < 100; ++i) {
    s.omega_body = Eigen::Vector3d::Random();
    s.joints = JointVector::Random() * 1.5;
    const JointVector out = rt.tick(s, cmd);
    for (int j = 0; j < kNumJoints; ++j) {
      CHECK(out[j] >= rt.geom.limit_lower(j) - 1e-12);
      CHECK(out[j] <= rt.geom.limit_upper(j) + 1e-12);
    }
    for (int leg = 0; leg < kNumLegs; ++leg) {
      CHECK(std::abs(coupling_violation(leg_angles(out, leg), rt.geom)) < 1e-12);
    }
  }
}

TEST_CASE("describe-policy reports layout and parameter count") {
  const PolicyWeights net = make_policy(PolicyKind::AttitudeControl, 0);
  const std::string d = describe_policy(net);
  CHECK(d.find("policy: attitude") != std::string::npos);
  CHECK(d.find("observation dim: 43") != std::string::npos);
  CHECK(d.find("orientation_error_quat") != std::string::npos);
  CHECK(d.find("dense 43 -> 512 (elu)") != std::string::npos);
  CHECK(d.find("dense 128 -> 12 (tanh)") != std::string::npos);
}
