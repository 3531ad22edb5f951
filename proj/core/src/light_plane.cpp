// SPDX-License-Identifier: Apache-2.0

#include "uwsl/light_plane.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

#include "uwsl/errors.hpp"

namespace uwsl {
namespace lightplane {

namespace {

// Coplanarity gate for estimate_plane, well above numerical noise.
constexpr double kCoplanarTolerance = 5e-3;  // m

double angle_between(const Vec3& u, const Vec3& v) {
  return std::atan2(u.cross(v).norm(), u.dot(v));
}

void require_sine(double angle, const char* name) {
  if (std::abs(std::sin(angle)) < 1e-9) {
    std::ostringstream os;
    os << "estimate_plane: degenerate geometry, sin(" << name << ") ~ 0";
    throw DegenerateInput(os.str());
  }
}

struct LineRecovery {
  Vec3 A, B, C, D;
  double y_c = 0.0;
};

// Recovers the metric camera-frame positions of the four collinear points
// of one ruling line.
LineRecovery recover_line(const std::array<Vec3, 4>& rays,
                          const std::array<Vec2, 4>& normalized, double Y_A,
                          double Y_B, double Y_D) {
  // Cross-ratio in the (projective) normalized image plane.
  const Vec2 dir = (normalized[3] - normalized[0]).normalized();
  double t[4];
  for (int i = 0; i < 4; ++i) {
    t[i] = (normalized[i] - normalized[0]).dot(dir);
  }
  const double num = (t[2] - t[0]) * (t[3] - t[1]);
  const double den = (t[2] - t[1]) * (t[3] - t[0]);
  if (std::abs(den) < 1e-15) {
    throw DegenerateInput("estimate_plane: coincident image points");
  }
  const double r = num / den;

  LineRecovery out;
  out.y_c = cross_ratio_locate(Y_A, Y_B, Y_D, r);

  const double ac = std::abs(out.y_c - Y_A);
  const double bc = std::abs(out.y_c - Y_B);
  const double bd = std::abs(Y_D - Y_B);
  const double cd = std::abs(Y_D - out.y_c);
  if (bc < 1e-12 || cd < 1e-12) {
    throw DegenerateInput("estimate_plane: laser point coincides with a mark");
  }

  const double theta1 = angle_between(rays[0], rays[1]);
  const double theta2 = angle_between(rays[1], rays[2]);
  const double theta3 = angle_between(rays[2], rays[3]);
  require_sine(theta2, "theta2");
  require_sine(theta3, "theta3");
  require_sine(theta2 + theta3, "theta2+theta3");
  require_sine(theta1 + theta2, "theta1+theta2");

  // k is the ray-length ratio |OD| / |OC|; delta the angle at the laser
  // point between the back-ray and the line direction towards D.
  const double k = (bd / bc) * std::sin(theta2) / std::sin(theta2 + theta3);
  const double delta =
      std::atan2(k * std::sin(theta3), 1.0 - k * std::cos(theta3));
  if (!(delta > 0.0) || !(delta < M_PI)) {
    throw DegenerateInput("estimate_plane: degenerate geometry, theta4");
  }
  if (!(delta - theta1 - theta2 > 1e-12)) {
    throw DegenerateInput(
        "estimate_plane: degenerate geometry, theta4 - theta1 - theta2 <= 0");
  }

  const double s_a = ac * std::sin(delta) / std::sin(theta1 + theta2);
  const double s_b = bc * std::sin(delta) / std::sin(theta2);
  const double s_c =
      ac * std::sin(delta - theta1 - theta2) / std::sin(theta1 + theta2);
  const double s_d = cd * std::sin(delta) / std::sin(theta3);

  out.A = s_a * rays[0];
  out.B = s_b * rays[1];
  out.C = s_c * rays[2];
  out.D = s_d * rays[3];
  return out;
}

// Total-least-squares plane through a point set.
LightPlane fit_plane(const Vec3* points, int n, Frame frame, double* rms) {
  Vec3 centroid = Vec3::Zero();
  for (int i = 0; i < n; ++i) centroid += points[i];
  centroid /= n;
  Mat3 scatter = Mat3::Zero();
  for (int i = 0; i < n; ++i) {
    const Vec3 q = points[i] - centroid;
    scatter += q * q.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(scatter);
  const Vec3 normal = es.eigenvectors().col(0);
  LightPlane plane = LightPlane::from_normal_point(normal, centroid, frame);
  if (rms != nullptr) {
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double e = plane.signed_distance(points[i]);
      ss += e * e;
    }
    *rms = std::sqrt(ss / n);
  }
  return plane;
}

}  // namespace

LightPlane::LightPlane(double a_, double b_, double c_, double d_,
                       Frame frame_) {
  const double n = std::sqrt(a_ * a_ + b_ * b_ + c_ * c_);
  if (!(n > 0.0) || !std::isfinite(n) || !std::isfinite(d_)) {
    throw InvalidArgument("LightPlane: normal must be nonzero and finite");
  }
  a = a_ / n;
  b = b_ / n;
  c = c_ / n;
  d = d_ / n;
  frame = frame_;
  const bool flip = c < 0.0 || (c == 0.0 && (a < 0.0 || (a == 0.0 && b < 0.0)));
  if (flip) {
    a = -a;
    b = -b;
    c = -c;
    d = -d;
  }
}

LightPlane LightPlane::from_normal_point(const Vec3& normal, const Vec3& point,
                                         Frame frame) {
  return LightPlane(normal.x(), normal.y(), normal.z(), -normal.dot(point),
                    frame);
}

double cross_ratio_locate(double Y_A, double Y_B, double Y_D, double r) {
  const double scale = std::max({1.0, std::abs(Y_D - Y_A), std::abs(Y_D - Y_B)});
  const double den = r * (Y_D - Y_A) - (Y_D - Y_B);
  if (std::abs(den) < 1e-12 * scale) {
    throw DegenerateInput("cross_ratio_locate: vanishing denominator");
  }
  return (Y_B - Y_A) * (Y_D - Y_B) / den + Y_B;
}

PlaneEstimate estimate_plane(const TargetObservation& obs) {
  std::array<Vec3, 8> rays;
  std::array<Vec2, 8> norm;
  for (int i = 0; i < 8; ++i) {
    Vec2 n = cam::pixel_to_normalized(obs.pixels[i], obs.K);
    if (!obs.dist.is_zero()) {
      n = cam::undistort_fdc(n, obs.dist).point;
    }
    norm[i] = n;
    rays[i] = Vec3(n.x(), n.y(), 1.0).normalized();
  }
  for (int i = 0; i < 8; ++i) {
    for (int j = i + 1; j < 8; ++j) {
      if ((rays[i] - rays[j]).norm() < 1e-12) {
        throw DegenerateInput("estimate_plane: identical rays");
      }
    }
  }

  const LineRecovery first =
      recover_line({rays[0], rays[1], rays[2], rays[3]},
                   {norm[0], norm[1], norm[2], norm[3]}, obs.Y_A, obs.Y_B,
                   obs.Y_D);
  const LineRecovery second =
      recover_line({rays[4], rays[5], rays[6], rays[7]},
                   {norm[4], norm[5], norm[6], norm[7]}, obs.Y_Ap, obs.Y_Bp,
                   obs.Y_Dp);

  PlaneEstimate out;
  out.y_c = first.y_c;
  out.y_cp = second.y_c;
  out.points_camera = {first.A,  first.B,  first.C,  first.D,
                       second.A, second.B, second.C, second.D};

  out.plane_camera = fit_plane(out.points_camera.data(), 8, Frame::kCamera,
                               &out.rms_camera);
  if (out.rms_camera > kCoplanarTolerance) {
    throw InconsistentObservationError(
        "estimate_plane: recovered points are not coplanar");
  }

  // World frame: first line is the X = 0 edge; the second line's offset
  // follows from the frame-invariant laser-point separation.
  const double cc = (second.C - first.C).norm();
  const double dy = second.y_c - first.y_c;
  const double x2_sq = cc * cc - dy * dy;
  if (x2_sq < 0.0) {
    throw InconsistentObservationError(
        "estimate_plane: laser separation shorter than height difference");
  }
  const double x2 = std::sqrt(x2_sq);
  out.points_world = {Vec3(0, obs.Y_A, 0),   Vec3(0, obs.Y_B, 0),
                      Vec3(0, first.y_c, 0), Vec3(0, obs.Y_D, 0),
                      Vec3(x2, obs.Y_Ap, 0), Vec3(x2, obs.Y_Bp, 0),
                      Vec3(x2, second.y_c, 0), Vec3(x2, obs.Y_Dp, 0)};
  out.plane_world = fit_plane(out.points_world.data(), 8, Frame::kWorld,
                              nullptr);
  return out;
}

RotationAxis axis_from_planes(const LightPlane& p1, const LightPlane& p2) {
  const Vec3 n1 = p1.normal();
  const Vec3 n2 = p2.normal();
  const Vec3 cross = n1.cross(n2);
  if (cross.norm() < 1e-9) {
    throw DegenerateInput("axis_from_planes: planes are parallel, no axis");
  }
  RotationAxis axis;
  axis.direction = cross.normalized();

  const double det = n1.x() * n2.y() - n2.x() * n1.y();
  if (std::abs(det) > 1e-9) {
    axis.point = Vec3((-p1.d * n2.y() + p2.d * n1.y()) / det,
                      (-p2.d * n1.x() + p1.d * n2.x()) / det, 0.0);
  } else {
    // Axis runs parallel to z = 0: take the axis point nearest the origin.
    Eigen::Matrix<double, 2, 3> A;
    A.row(0) = n1.transpose();
    A.row(1) = n2.transpose();
    const Vec2 b(-p1.d, -p2.d);
    axis.point = A.transpose() * (A * A.transpose()).inverse() * b;
    axis.z0_fallback = true;
  }
  return axis;
}

LightPlane rotate_plane(const LightPlane& p1, const RotationAxis& axis,
                        double theta_rad) {
  const Mat3 R = geom::rodrigues(axis.direction, theta_rad);
  const Vec3 n = R * p1.normal();
  return LightPlane::from_normal_point(n, axis.point, p1.frame);
}

}  // namespace lightplane
}  // namespace uwsl
