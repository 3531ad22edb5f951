// SPDX-License-Identifier: Apache-2.0
//
// SO(3)/SE(3) kernel: Rodrigues rotations, exp/log maps, SVD
// re-orthonormalization and quaternion algebra.
//
// Conventions used throughout the library:
//   * quaternions are Hamilton, scalar-first, right-handed;
//   * twists are ordered [rho; phi] (translation first, rotation second);
//   * angles are radians, lengths are meters.

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace uwsl {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;
using Quat = Eigen::Quaterniond;

namespace geom {

/// Twist [rho; phi]: rho = translational part (m), phi = rotational part (rad).
using Twist = Vec6;

/// Rigid transform: x_out = R * x_in + t.
struct RigidTransform {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  RigidTransform() = default;
  RigidTransform(const Mat3& rotation, const Vec3& translation)
      : R(rotation), t(translation) {}

  static RigidTransform Identity() { return {}; }

  RigidTransform operator*(const RigidTransform& o) const {
    return {R * o.R, R * o.t + t};
  }
  Vec3 operator*(const Vec3& p) const { return R * p + t; }

  RigidTransform inverse() const { return {R.transpose(), -(R.transpose() * t)}; }
};

/// Skew matrix K such that K * u = v x u.
Mat3 skew(const Vec3& v);

/// Rotation about a unit axis: I + sin(a) K + (1 - cos(a)) K^2.
/// Throws InvalidArgument unless |axis| = 1 within 1e-9.
Mat3 rodrigues(const Vec3& axis, double angle_rad);

/// SO(3) exponential of an unnormalized rotation vector phi = axis * angle.
Mat3 so3_exp(const Vec3& phi);

/// SO(3) logarithm, branch-stable up to and including angle pi.
Vec3 so3_log(const Mat3& R);

/// SE(3) exponential map on [rho; phi] twists.
RigidTransform exp_se3(const Twist& xi);

/// SE(3) logarithm; inverse of exp_se3 on the principal branch.
/// Throws InvalidArgument on NaN input.
Twist log_se3(const RigidTransform& T);

/// Nearest rotation in Frobenius norm via SVD (U V^T).
/// Throws DegenerateInput when the input is rank deficient or its
/// orthogonal projection would be a reflection.
Mat3 orthonormalize(const Mat3& m);

/// Hamilton product a (x) b.
Quat quat_multiply(const Quat& a, const Quat& b);

/// Hamilton product with v promoted to the pure quaternion (0, v).
Quat quat_multiply(const Quat& a, const Vec3& v);

/// Unit quaternion for a small rotation vector (first-order safe at zero).
Quat quat_from_rotation_vector(const Vec3& phi);

/// Rotation vector of a unit quaternion (principal branch).
Vec3 quat_to_rotation_vector(const Quat& q);

/// True when every entry of the transform is finite.
bool is_finite(const RigidTransform& T);

}  // namespace geom
}  // namespace uwsl
