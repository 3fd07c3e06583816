#pragma once

#include <Eigen/Geometry>
#include <cmath>

#include "lowg/types.hpp"

namespace lowg {

using Quaternion = Eigen::Quaterniond;

struct QuaternionError {
  Quaternion error;      // unit, canonicalized so w >= 0
  double angle;          // rad, in [0, pi]
  Eigen::Vector3d axis;  // unit rotation axis, zero vector at angle 0
};

// Relative rotation between body and reference: q_err = q_ref^* (x) q_body.
inline QuaternionError quaternion_error(const Quaternion& q_body, const Quaternion& q_ref) {
  Quaternion e = q_ref.conjugate() * q_body;
  e.normalize();
  if (e.w() < 0.0) e.coeffs() = -e.coeffs();
  const double vec_norm = e.vec().norm();
  const double angle = 2.0 * std::atan2(vec_norm, e.w());
  Eigen::Vector3d axis = Eigen::Vector3d::Zero();
  if (vec_norm > 1e-12) axis = e.vec() / vec_norm;
  return {e, angle, axis};
}

// Exact attitude increment by the quaternion exponential map, omega in the
// body frame.
inline Quaternion integrate_orientation(const Quaternion& q, const Eigen::Vector3d& omega_body,
                                        double dt) {
  const Eigen::Vector3d half = 0.5 * omega_body * dt;
  const double n = half.norm();
  Quaternion dq;
  if (n < 1e-12) {
    dq = Quaternion(1.0, half.x(), half.y(), half.z());
  } else {
    const Eigen::Vector3d v = half / n * std::sin(n);
    dq = Quaternion(std::cos(n), v.x(), v.y(), v.z());
  }
  Quaternion out = q * dq;
  out.normalize();
  return out;
}

}  // namespace lowg
