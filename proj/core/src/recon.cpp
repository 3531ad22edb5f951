// SPDX-License-Identifier: Apache-2.0

#include "uwsl/recon.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

#include "uwsl/errors.hpp"

namespace uwsl {
namespace recon {

Vec3 triangulate(const Vec2& pixel, const cam::Intrinsics& K,
                 const cam::DistortionCoeffs& c,
                 const lightplane::LightPlane& plane) {
  Vec2 n = cam::pixel_to_normalized(pixel, K);
  if (!c.is_zero()) {
    n = cam::undistort_fdc(n, c).point;
  }
  const Vec3 dir(n.x(), n.y(), 1.0);
  const Vec3 normal = plane.normal();
  const double denom = normal.dot(dir);
  if (std::abs(denom / dir.norm()) < 1e-9) {
    throw NoIntersectionError("triangulate: ray parallel to light plane");
  }
  const double s = -plane.d / denom;
  if (!(s > 0.0)) {
    throw BehindCameraError("triangulate: intersection behind the camera");
  }
  return s * dir;
}

FrameAlignment solve_frame_rotation(
    const std::vector<PointCorrespondence>& correspondences,
    const lightplane::LightPlane& plane_camera,
    const lightplane::LightPlane& plane_world) {
  if (correspondences.size() < 3) {
    throw DegenerateInput("solve_frame_rotation: need >= 3 correspondences");
  }
  Vec3 cc = Vec3::Zero(), cw = Vec3::Zero();
  for (const PointCorrespondence& pc : correspondences) {
    cc += pc.camera;
    cw += pc.world;
  }
  cc /= double(correspondences.size());
  cw /= double(correspondences.size());

  Mat3 H = Mat3::Zero();
  for (const PointCorrespondence& pc : correspondences) {
    H += (pc.camera - cc) * (pc.world - cw).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(1) < 1e-12 * std::max(1.0, svd.singularValues()(0))) {
    throw DegenerateInput("solve_frame_rotation: collinear correspondences");
  }
  Mat3 D = Mat3::Identity();
  D(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0
                ? -1.0
                : 1.0;
  FrameAlignment out;
  out.R = svd.matrixV() * D * svd.matrixU().transpose();
  out.t = cw - out.R * cc;

  double ss = 0.0;
  for (const PointCorrespondence& pc : correspondences) {
    ss += (out.R * pc.camera + out.t - pc.world).squaredNorm();
  }
  // Fold in how well the rotation carries the calibrated plane normal.
  const Vec3 n_mapped = out.R * plane_camera.normal();
  const double normal_err =
      1.0 - std::abs(n_mapped.dot(plane_world.normal()));
  out.rms = std::sqrt(ss / double(correspondences.size())) + normal_err;
  return out;
}

FramePose translation_pose(const Vec3& t1, const Vec3& t2, double tau1,
                           double tau2, const Mat3& R_world_cam,
                           const Vec3& t_base, double dtau) {
  if (!(tau2 > tau1)) {
    throw InvalidArgument("translation_pose: tau2 must exceed tau1");
  }
  const Vec3 rate = (t2 - t1) / (tau2 - tau1);
  FramePose out;
  out.T = RigidTransform(R_world_cam, rate * dtau + t_base);
  return out;
}

FramePose tr_pose(int motion_flag, const Vec3& rate, double dtau,
                  const std::optional<Vec3>& fused_velocity,
                  const Mat3& R_cam_fused, const Mat3& R_world_cam,
                  const Vec3& t_base, double stale_gap_s) {
  if (motion_flag != 0 && motion_flag != 1) {
    throw InvalidArgument("tr_pose: motion flag must be 0 or 1");
  }
  Vec3 displacement;
  if (motion_flag == 0) {
    displacement = rate * dtau;
  } else {
    if (!fused_velocity.has_value()) {
      throw StaleVelocityError("tr_pose: no fused velocity sample in range",
                               stale_gap_s);
    }
    displacement = R_cam_fused * (*fused_velocity) * dtau;
  }
  FramePose out;
  out.T = RigidTransform(R_world_cam, displacement + t_base);
  return out;
}

namespace {

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) {
    return (p - a).norm();
  }
  const double u = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + u * ab)).norm();
}

double distance_to_polylines(const Vec2& p,
                             const std::vector<EdgePolyline>& edges) {
  double best = std::numeric_limits<double>::infinity();
  for (const EdgePolyline& e : edges) {
    if (e.vertices.size() == 1) {
      best = std::min(best, (p - e.vertices[0]).norm());
      continue;
    }
    for (std::size_t i = 0; i + 1 < e.vertices.size(); ++i) {
      best = std::min(best,
                      point_segment_distance(p, e.vertices[i], e.vertices[i + 1]));
    }
  }
  return best;
}

}  // namespace

GatedStripe gate_stripe(const StripeFrame& stripe,
                        const std::vector<EdgePolyline>& edges,
                        double eps_px) {
  if (!(eps_px > 0.0)) {
    throw InvalidArgument("gate_stripe: eps must be positive");
  }
  GatedStripe out;
  out.frame = stripe;
  if (edges.empty()) {
    out.gated = false;
    return out;
  }
  out.gated = true;
  if (std::isinf(eps_px)) {
    return out;
  }
  out.frame.pixels.clear();
  for (const Vec2& p : stripe.pixels) {
    if (distance_to_polylines(p, edges) <= eps_px) {
      out.frame.pixels.push_back(p);
    }
  }
  return out;
}

namespace {

// 3x3 Sobel gradients with clamped borders.
void sobel(const GrayImage& img, std::vector<float>& gx,
           std::vector<float>& gy) {
  const int w = img.width, h = img.height;
  gx.assign(std::size_t(w) * h, 0.f);
  gy.assign(std::size_t(w) * h, 0.f);
  auto clamped = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return img.at(x, y);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float tl = clamped(x - 1, y - 1), tc = clamped(x, y - 1),
                  tr = clamped(x + 1, y - 1);
      const float ml = clamped(x - 1, y), mr = clamped(x + 1, y);
      const float bl = clamped(x - 1, y + 1), bc = clamped(x, y + 1),
                  br = clamped(x + 1, y + 1);
      gx[std::size_t(y) * w + x] = (tr + 2 * mr + br) - (tl + 2 * ml + bl);
      gy[std::size_t(y) * w + x] = (bl + 2 * bc + br) - (tl + 2 * tc + tr);
    }
  }
}

}  // namespace

std::vector<EdgePolyline> detect_edges(const GrayImage& image) {
  if (image.width <= 0 || image.height <= 0 || image.px.empty()) {
    throw InvalidArgument("detect_edges: empty image");
  }
  const int w = image.width, h = image.height;
  std::vector<float> gx, gy;
  sobel(image, gx, gy);

  std::vector<float> mag(std::size_t(w) * h, 0.f);
  float max_mag = 0.f;
  for (std::size_t i = 0; i < mag.size(); ++i) {
    mag[i] = std::hypot(gx[i], gy[i]);
    max_mag = std::max(max_mag, mag[i]);
  }
  if (max_mag <= 1e-12f) {
    return {};
  }

  // Non-maximum suppression along the quantized gradient direction.
  std::vector<uint8_t> ridge(std::size_t(w) * h, 0);
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const std::size_t i = std::size_t(y) * w + x;
      if (mag[i] <= 0.f) continue;
      const float angle = std::atan2(gy[i], gx[i]);
      const float a = std::fmod(angle + float(M_PI), float(M_PI));
      int dx = 1, dy = 0;
      if (a < M_PI / 8 || a >= 7 * M_PI / 8) {
        dx = 1; dy = 0;
      } else if (a < 3 * M_PI / 8) {
        dx = 1; dy = 1;
      } else if (a < 5 * M_PI / 8) {
        dx = 0; dy = 1;
      } else {
        dx = -1; dy = 1;
      }
      const float m1 = mag[std::size_t(y + dy) * w + (x + dx)];
      const float m2 = mag[std::size_t(y - dy) * w + (x - dx)];
      if (mag[i] >= m1 && mag[i] >= m2) {
        ridge[i] = 1;
      }
    }
  }

  // Hysteresis relative to the strongest response.
  const float hi = 0.20f * max_mag;
  const float lo = 0.08f * max_mag;
  std::vector<uint8_t> keep(std::size_t(w) * h, 0);
  std::vector<std::pair<int, int>> stack;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const std::size_t i = std::size_t(y) * w + x;
      if (ridge[i] && mag[i] >= hi && !keep[i]) {
        keep[i] = 1;
        stack.emplace_back(x, y);
        while (!stack.empty()) {
          auto [cx, cy] = stack.back();
          stack.pop_back();
          for (int oy = -1; oy <= 1; ++oy) {
            for (int ox = -1; ox <= 1; ++ox) {
              const int nx = cx + ox, ny = cy + oy;
              if (nx < 1 || ny < 1 || nx >= w - 1 || ny >= h - 1) continue;
              const std::size_t ni = std::size_t(ny) * w + nx;
              if (!keep[ni] && ridge[ni] && mag[ni] >= lo) {
                keep[ni] = 1;
                stack.emplace_back(nx, ny);
              }
            }
          }
        }
      }
    }
  }

  // Link kept pixels into chains, starting from endpoints.
  auto neighbor_count = [&](int x, int y) {
    int n = 0;
    for (int oy = -1; oy <= 1; ++oy) {
      for (int ox = -1; ox <= 1; ++ox) {
        if (ox == 0 && oy == 0) continue;
        const int nx = x + ox, ny = y + oy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        n += keep[std::size_t(ny) * w + nx];
      }
    }
    return n;
  };

  std::vector<uint8_t> visited(std::size_t(w) * h, 0);
  std::vector<EdgePolyline> polylines;
  auto trace_from = [&](int sx, int sy) {
    EdgePolyline line;
    int cx = sx, cy = sy;
    while (true) {
      visited[std::size_t(cy) * w + cx] = 1;
      line.vertices.emplace_back(double(cx), double(cy));
      bool advanced = false;
      for (int oy = -1; oy <= 1 && !advanced; ++oy) {
        for (int ox = -1; ox <= 1 && !advanced; ++ox) {
          if (ox == 0 && oy == 0) continue;
          const int nx = cx + ox, ny = cy + oy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t ni = std::size_t(ny) * w + nx;
          if (keep[ni] && !visited[ni]) {
            cx = nx;
            cy = ny;
            advanced = true;
          }
        }
      }
      if (!advanced) break;
    }
    if (line.vertices.size() >= 10) {
      polylines.push_back(std::move(line));
    }
  };

  for (int pass = 0; pass < 2; ++pass) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = std::size_t(y) * w + x;
        if (!keep[i] || visited[i]) continue;
        // first pass: open chains from endpoints; second: leftover loops
        if (pass == 0 && neighbor_count(x, y) != 1) continue;
        trace_from(x, y);
      }
    }
  }
  return polylines;
}

CloudBuildResult build_cloud(const std::vector<StripeFrame>& frames,
                             const std::vector<FramePose>& poses,
                             const PlaneProvider& plane_for,
                             const cam::Intrinsics& K,
                             const cam::DistortionCoeffs& c) {
  CloudBuildResult out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i >= poses.size()) {
      ++out.dropped_frames;
      continue;
    }
    const StripeFrame& f = frames[i];
    const lightplane::LightPlane plane = plane_for(f);
    const RigidTransform& T = poses[i].T;
    for (const Vec2& px : f.pixels) {
      out.cloud.push_back(T * triangulate(px, K, c, plane), f.id);
    }
  }
  return out;
}

}  // namespace recon
}  // namespace uwsl
