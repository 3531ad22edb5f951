// SPDX-License-Identifier: Apache-2.0

#include "uwsl/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "uwsl/errors.hpp"

namespace uwsl {
namespace geom {

namespace {

constexpr double kSmallAngle = 1e-6;

Vec3 vee(const Mat3& m) {
  return {m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)};
}

// Left Jacobian of SO(3): t = V(phi) * rho in exp_se3.
Mat3 left_jacobian(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 K = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + 0.5 * K + (1.0 / 6.0) * K * K;
  }
  const double t2 = theta * theta;
  const double a = (1.0 - std::cos(theta)) / t2;
  const double b = (theta - std::sin(theta)) / (t2 * theta);
  return Mat3::Identity() + a * K + b * K * K;
}

Mat3 left_jacobian_inverse(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 K = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() - 0.5 * K + (1.0 / 12.0) * K * K;
  }
  const double c =
      1.0 / (theta * theta) -
      (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Mat3::Identity() - 0.5 * K + c * K * K;
}

}  // namespace

Mat3 skew(const Vec3& v) {
  Mat3 m;
  // clang-format off
  m <<     0, -v.z(),  v.y(),
       v.z(),      0, -v.x(),
      -v.y(),  v.x(),      0;
  // clang-format on
  return m;
}

Mat3 rodrigues(const Vec3& axis, double angle_rad) {
  if (!axis.allFinite() || !std::isfinite(angle_rad)) {
    throw InvalidArgument("rodrigues: non-finite input");
  }
  if (std::abs(axis.norm() - 1.0) > 1e-9) {
    throw InvalidArgument("rodrigues: axis must be unit length");
  }
  const Mat3 K = skew(axis);
  return Mat3::Identity() + std::sin(angle_rad) * K +
         (1.0 - std::cos(angle_rad)) * K * K;
}

Mat3 so3_exp(const Vec3& phi) {
  const double theta = phi.norm();
  if (theta < kSmallAngle) {
    const Mat3 K = skew(phi);
    return Mat3::Identity() + K + 0.5 * K * K;
  }
  return rodrigues(phi / theta, theta);
}

Vec3 so3_log(const Mat3& R) {
  if (!R.allFinite()) {
    throw InvalidArgument("so3_log: non-finite rotation");
  }
  const double cos_theta =
      std::min(1.0, std::max(-1.0, (R.trace() - 1.0) * 0.5));
  const double theta = std::acos(cos_theta);

  if (theta < kSmallAngle) {
    return 0.5 * vee(R);
  }
  if (theta < M_PI - 1e-6) {
    return (theta / (2.0 * std::sin(theta))) * vee(R);
  }

  // Near-pi branch: axis direction from the dominant diagonal of
  // R + R^T = 2 cos(theta) I + 2 (1 - cos(theta)) a a^T.
  const Mat3 S = R + R.transpose();
  int k = 0;
  S.diagonal().maxCoeff(&k);
  Vec3 axis = S.col(k);
  axis(k) -= 2.0 * cos_theta;
  const double n = axis.norm();
  if (n < 1e-12) {
    throw InvalidArgument("so3_log: cannot extract axis near pi");
  }
  axis /= n;

  // Fix the sign from the antisymmetric part when it still carries one;
  // at exactly pi both signs are equivalent and we pick a canonical one.
  const Vec3 w = vee(R);
  if (w.norm() > 1e-12) {
    if (axis.dot(w) < 0.0) axis = -axis;
  } else {
    int j = 0;
    axis.cwiseAbs().maxCoeff(&j);
    if (axis(j) < 0.0) axis = -axis;
  }
  return theta * axis;
}

RigidTransform exp_se3(const Twist& xi) {
  if (!xi.allFinite()) {
    throw InvalidArgument("exp_se3: non-finite twist");
  }
  const Vec3 rho = xi.head<3>();
  const Vec3 phi = xi.tail<3>();
  return {so3_exp(phi), left_jacobian(phi) * rho};
}

Twist log_se3(const RigidTransform& T) {
  if (!is_finite(T)) {
    throw InvalidArgument("log_se3: non-finite transform");
  }
  const Vec3 phi = so3_log(T.R);
  Twist xi;
  xi.head<3>() = left_jacobian_inverse(phi) * T.t;
  xi.tail<3>() = phi;
  return xi;
}

Mat3 orthonormalize(const Mat3& m) {
  if (!m.allFinite()) {
    throw InvalidArgument("orthonormalize: non-finite matrix");
  }
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(2) < 1e-12 * svd.singularValues()(0) ||
      svd.singularValues()(0) == 0.0) {
    throw DegenerateInput("orthonormalize: rank-deficient input");
  }
  const Mat3 R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0.0) {
    throw DegenerateInput("orthonormalize: projection would mirror (det < 0)");
  }
  return R;
}

Quat quat_multiply(const Quat& a, const Quat& b) {
  if (!a.coeffs().allFinite() || !b.coeffs().allFinite()) {
    throw InvalidArgument("quat_multiply: non-finite quaternion");
  }
  return a * b;
}

Quat quat_multiply(const Quat& a, const Vec3& v) {
  return quat_multiply(a, Quat(0.0, v.x(), v.y(), v.z()));
}

Quat quat_from_rotation_vector(const Vec3& phi) {
  const double theta = phi.norm();
  if (theta < kSmallAngle) {
    Quat q(1.0, 0.5 * phi.x(), 0.5 * phi.y(), 0.5 * phi.z());
    q.normalize();
    return q;
  }
  const double half = 0.5 * theta;
  const Vec3 axis = phi / theta;
  const double s = std::sin(half);
  return Quat(std::cos(half), s * axis.x(), s * axis.y(), s * axis.z());
}

Vec3 quat_to_rotation_vector(const Quat& q) {
  return so3_log(q.normalized().toRotationMatrix());
}

bool is_finite(const RigidTransform& T) {
  return T.R.allFinite() && T.t.allFinite();
}

}  // namespace geom
}  // namespace uwsl
