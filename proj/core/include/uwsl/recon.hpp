// SPDX-License-Identifier: Apache-2.0
//
// Point-cloud generation for the three imaging modes: ray-plane
// triangulation, per-frame pose models, edge-gated stripe filtering and a
// pluggable edge detector with a classical gradient-ridge default.

#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "uwsl/camera.hpp"
#include "uwsl/geometry.hpp"
#include "uwsl/light_plane.hpp"

namespace uwsl {
namespace recon {

using geom::RigidTransform;

/// Stripe centerline pixels of one camera frame.
struct StripeFrame {
  int id = 0;
  double t = 0.0;                 ///< s
  std::vector<Vec2> pixels;       ///< px, centerline samples
  double servo_angle = 0.0;       ///< rad, laser rotation feedback
  int motion_flag = 0;            ///< 0 uniform speed, 1 variable speed
};

/// Camera-to-world pose at one frame time.
struct FramePose {
  double t = 0.0;
  RigidTransform T;  ///< camera -> world
};

struct PointCloud {
  std::vector<Vec3> points;       ///< world frame, m
  std::vector<int> frame_ids;
  std::vector<double> weights;    ///< optional; empty means all 1

  std::size_t size() const { return points.size(); }
  void push_back(const Vec3& p, int frame_id) {
    points.push_back(p);
    frame_ids.push_back(frame_id);
  }
};

struct EdgePolyline {
  std::vector<Vec2> vertices;  ///< ordered pixel positions
};

/// Row-major grayscale raster with values in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> px;

  float at(int x, int y) const { return px[std::size_t(y) * width + x]; }
  float& at(int x, int y) { return px[std::size_t(y) * width + x]; }
};

/// Intersects the undistorted pixel ray with a camera-frame plane.
/// Throws NoIntersectionError for rays parallel to the plane and
/// BehindCameraError for non-positive depth.
Vec3 triangulate(const Vec2& pixel, const cam::Intrinsics& K,
                 const cam::DistortionCoeffs& c,
                 const lightplane::LightPlane& plane);

struct PointCorrespondence {
  Vec3 camera = Vec3::Zero();
  Vec3 world = Vec3::Zero();
};

struct FrameAlignment {
  Mat3 R;      ///< camera -> world rotation
  Vec3 t;      ///< camera -> world translation
  double rms = 0.0;  ///< alignment residual, m
};

/// Rigid camera->world alignment from >= 3 non-collinear correspondences via
/// SVD of the cross-covariance; a reflection is repaired by flipping the
/// smallest singular direction. The plane pair contributes a normal
/// consistency term to the reported residual.
FrameAlignment solve_frame_rotation(
    const std::vector<PointCorrespondence>& correspondences,
    const lightplane::LightPlane& plane_camera,
    const lightplane::LightPlane& plane_world);

/// Linear-in-time pose: T(tau) rotates by R and translates by
/// base + (t2 - t1)/(tau2 - tau1) * dtau. Throws InvalidArgument when
/// tau2 == tau1.
FramePose translation_pose(const Vec3& t1, const Vec3& t2, double tau1,
                           double tau2, const Mat3& R_world_cam,
                           const Vec3& t_base, double dtau);

/// Displacement for the combined mode: uniform branch uses the inter-frame
/// rate, variable branch integrates the fused velocity over the interval.
/// Throws StaleVelocityError when the fused sample is missing in the
/// variable branch.
FramePose tr_pose(int motion_flag, const Vec3& rate, double dtau,
                  const std::optional<Vec3>& fused_velocity,
                  const Mat3& R_cam_fused, const Mat3& R_world_cam,
                  const Vec3& t_base, double stale_gap_s = 0.0);

struct GatedStripe {
  StripeFrame frame;
  bool gated = false;  ///< false when no edges were available
};

/// Keeps stripe pixels within eps_px of any edge polyline; pixel order is
/// preserved. An empty edge set returns the stripe unchanged and un-gated.
GatedStripe gate_stripe(const StripeFrame& stripe,
                        const std::vector<EdgePolyline>& edges, double eps_px);

/// Pluggable edge detector; the default is gradient-magnitude ridge
/// extraction with hysteresis, linked into polylines of >= 10 px.
using EdgeDetector = std::function<std::vector<EdgePolyline>(const GrayImage&)>;

std::vector<EdgePolyline> detect_edges(const GrayImage& image);

/// Supplies the camera-frame laser plane for a frame (rotation mode feeds
/// the servo angle through rotate_plane).
using PlaneProvider = std::function<lightplane::LightPlane(const StripeFrame&)>;

struct CloudBuildResult {
  PointCloud cloud;
  int dropped_frames = 0;  ///< frames without a matching pose
};

/// Triangulates every frame against its plane and maps the points to the
/// world frame by the frame pose. Frames and poses are matched by frame
/// index; a missing pose drops the frame.
CloudBuildResult build_cloud(const std::vector<StripeFrame>& frames,
                             const std::vector<FramePose>& poses,
                             const PlaneProvider& plane_for,
                             const cam::Intrinsics& K,
                             const cam::DistortionCoeffs& c);

}  // namespace recon
}  // namespace uwsl
