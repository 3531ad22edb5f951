// SPDX-License-Identifier: Apache-2.0
//
// Laser-plane estimation from a single planar-target view and real-time
// plane rotation about the servo axis.
//
// The target carries two parallel ruling lines. Each line shows three marks
// at known heights plus the laser crossing point, whose height is located by
// the cross-ratio of the four image points. Metric camera-frame positions
// then follow from the inter-ray angles and the sine theorem, and the plane
// is fit through all recovered points.

#pragma once

#include <array>

#include "uwsl/camera.hpp"
#include "uwsl/geometry.hpp"

namespace uwsl {
namespace lightplane {

enum class Frame { kCamera, kWorld };

/// Plane a x + b y + c z + d = 0 with |(a,b,c)| = 1, canonical sign
/// c >= 0 (ties: a >= 0, then b >= 0).
struct LightPlane {
  double a = 0.0;
  double b = 0.0;
  double c = 1.0;
  double d = 0.0;
  Frame frame = Frame::kCamera;

  LightPlane() = default;
  LightPlane(double a, double b, double c, double d, Frame frame);

  static LightPlane from_normal_point(const Vec3& normal, const Vec3& point,
                                      Frame frame);

  Vec3 normal() const { return {a, b, c}; }
  double signed_distance(const Vec3& p) const {
    return a * p.x() + b * p.y() + c * p.z() + d;
  }
};

/// One view of the two-line target. Pixel order: a, b, c, d on the first
/// line, then a', b', c', d' on the second; c and c' are the laser
/// crossings whose heights are unknown.
struct TargetObservation {
  std::array<Vec2, 8> pixels{};  ///< px
  double Y_A = 0.0, Y_B = 0.0, Y_D = 0.0;     ///< first-line marks, m
  double Y_Ap = 0.0, Y_Bp = 0.0, Y_Dp = 0.0;  ///< second-line marks, m
  cam::Intrinsics K;
  cam::DistortionCoeffs dist;
};

/// Servo rotation axis: unit direction plus a point on the axis, normally
/// chosen on the z = 0 plane.
struct RotationAxis {
  Vec3 direction = Vec3::UnitZ();
  Vec3 point = Vec3::Zero();
  bool z0_fallback = false;  ///< axis missed z = 0; nearest-to-origin point used
};

struct PlaneEstimate {
  LightPlane plane_camera;
  LightPlane plane_world;
  std::array<Vec3, 8> points_camera{};
  std::array<Vec3, 8> points_world{};
  double rms_camera = 0.0;  ///< point-to-plane RMS of the camera-frame fit, m
  double y_c = 0.0;         ///< located laser height on the first line, m
  double y_cp = 0.0;        ///< located laser height on the second line, m
};

/// Height of the fourth collinear point from the cross-ratio
/// r = (Y_C - Y_A)(Y_D - Y_B) / ((Y_C - Y_B)(Y_D - Y_A)).
/// Throws DegenerateInput when the inversion denominator vanishes.
double cross_ratio_locate(double Y_A, double Y_B, double Y_D, double r);

/// Full single-view estimation. Throws DegenerateInput naming the offending
/// angle when the sine-theorem geometry collapses, and
/// InconsistentObservationError when the recovered points are not coplanar.
PlaneEstimate estimate_plane(const TargetObservation& obs);

/// Axis of the rotating plane from the pre- and post-rotation calibrations.
/// Throws DegenerateInput for parallel planes.
RotationAxis axis_from_planes(const LightPlane& p1, const LightPlane& p2);

/// Rotates a plane about the axis by theta_rad; the axis point stays on the
/// rotated plane.
LightPlane rotate_plane(const LightPlane& p1, const RotationAxis& axis,
                        double theta_rad);

}  // namespace lightplane
}  // namespace uwsl
