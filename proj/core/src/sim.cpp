// SPDX-License-Identifier: Apache-2.0

#include "uwsl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "uwsl/errors.hpp"

namespace uwsl {
namespace sim {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double wrap_pi(double a) {
  while (a > M_PI) a -= kTwoPi;
  while (a < -M_PI) a += kTwoPi;
  return a;
}

}  // namespace

double Rng::uniform() {
  return double(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

Vec3 Rng::normal3() {
  const double a = normal();
  const double b = normal();
  const double c = normal();
  return {a, b, c};
}

void SceneSpec::validate() const {
  for (const CylinderSegment& s : segments) {
    if (!(s.radius_m > 0.0) || !(s.length_m > 0.0)) {
      throw InvalidSpecError("SceneSpec: segment radius/length must be > 0");
    }
  }
  for (const Defect& d : defects) {
    if (d.segment >= segments.size()) {
      throw InvalidSpecError("SceneSpec: defect references missing segment");
    }
    if (!(d.size_m > 0.0) || d.size_m >= segments[d.segment].radius_m) {
      throw InvalidSpecError("SceneSpec: defect size must be < radius");
    }
  }
}

Scene::Scene(SceneSpec spec, std::uint64_t /*seed*/) : spec_(std::move(spec)) {
  spec_.validate();
  for (const Defect& d : spec_.defects) {
    if (d.type != DefectType::kLeak) {
      max_bump_ = std::max(max_bump_, d.size_m);
    }
  }
}

double Scene::surface_radius(std::size_t segment, double axial,
                             double angle) const {
  double r = spec_.segments[segment].radius_m;
  for (const Defect& d : spec_.defects) {
    if (d.segment != segment || d.type == DefectType::kLeak) continue;
    const double da = axial - d.axial_m;
    const double arc = spec_.segments[segment].radius_m *
                       wrap_pi(angle - d.angle_rad);
    const double g =
        d.size_m * std::exp(-(da * da + arc * arc) / (2.0 * d.sigma_m * d.sigma_m));
    r += (d.type == DefectType::kAttachment) ? g : -g;
  }
  return r;
}

bool Scene::in_leak_hole(std::size_t segment, double axial,
                         double angle) const {
  for (const Defect& d : spec_.defects) {
    if (d.segment != segment || d.type != DefectType::kLeak) continue;
    const double da = axial - d.axial_m;
    const double arc = spec_.segments[segment].radius_m *
                       wrap_pi(angle - d.angle_rad);
    if (std::sqrt(da * da + arc * arc) <= d.size_m) {
      return true;
    }
  }
  return false;
}

double Scene::surface_level(const Vec3& p_world) const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < spec_.segments.size(); ++i) {
    const CylinderSegment& seg = spec_.segments[i];
    const Vec3 p = seg.pose.inverse() * p_world;
    const double axial = std::clamp(p.x(), 0.0, seg.length_m);
    const double radial = std::hypot(p.y(), p.z());
    const double angle = std::atan2(p.y(), p.z());  // 0 at local +z
    const double dev = radial - surface_radius(i, axial, angle);
    if (std::abs(dev) < std::abs(best)) {
      best = dev;
    }
  }
  return best;
}

std::optional<double> Scene::raycast_segment(std::size_t idx, const Vec3& o,
                                             const Vec3& d) const {
  const CylinderSegment& seg = spec_.segments[idx];
  const geom::RigidTransform inv = seg.pose.inverse();
  const Vec3 ol = inv * o;
  const Vec3 dl = inv.R * d;

  const double a = dl.y() * dl.y() + dl.z() * dl.z();
  if (a < 1e-18) {
    return std::nullopt;
  }

  bool has_bumps = false;
  for (const Defect& df : spec_.defects) {
    if (df.segment == idx && df.type != DefectType::kLeak) {
      has_bumps = true;
      break;
    }
  }

  auto roots_for = [&](double radius, double& t1, double& t2) {
    const double b = 2.0 * (ol.y() * dl.y() + ol.z() * dl.z());
    const double c = ol.y() * ol.y() + ol.z() * ol.z() - radius * radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return false;
    const double sq = std::sqrt(disc);
    t1 = (-b - sq) / (2.0 * a);
    t2 = (-b + sq) / (2.0 * a);
    return true;
  };

  auto axial_ok = [&](double t) {
    const double x = ol.x() + t * dl.x();
    return x >= 0.0 && x <= seg.length_m;
  };

  if (!has_bumps) {
    double t1, t2;
    if (!roots_for(seg.radius_m, t1, t2)) {
      return std::nullopt;
    }
    for (double t : {t1, t2}) {
      if (t > 1e-9 && axial_ok(t)) {
        return t;
      }
    }
    return std::nullopt;
  }

  // Bumpy surface: bracket with the outer cylinder, then locate the first
  // outside->inside crossing of the radial level function.
  double ta, tb;
  if (!roots_for(seg.radius_m + max_bump_, ta, tb)) {
    return std::nullopt;
  }
  ta = std::max(ta, 1e-9);
  if (!(tb > ta)) {
    return std::nullopt;
  }

  auto level = [&](double t) {
    const Vec3 p = ol + t * dl;
    if (p.x() < 0.0 || p.x() > seg.length_m) {
      return std::numeric_limits<double>::infinity();
    }
    const double radial = std::hypot(p.y(), p.z());
    const double angle = std::atan2(p.y(), p.z());
    return radial - surface_radius(idx, p.x(), angle);
  };

  constexpr int kScan = 96;
  double prev_t = ta;
  double prev_f = level(ta);
  for (int i = 1; i <= kScan; ++i) {
    const double t = ta + (tb - ta) * i / kScan;
    const double f = level(t);
    if (std::isfinite(prev_f) && std::isfinite(f) && prev_f > 0.0 && f <= 0.0) {
      double lo = prev_t, hi = t;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (level(mid) > 0.0) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      return 0.5 * (lo + hi);
    }
    prev_t = t;
    prev_f = f;
  }
  return std::nullopt;
}

std::optional<SurfaceHit> Scene::raycast(const Vec3& origin,
                                         const Vec3& dir) const {
  double best_t = std::numeric_limits<double>::infinity();
  bool best_clutter = false;
  bool absorbed = false;

  for (std::size_t i = 0; i < spec_.segments.size(); ++i) {
    const std::optional<double> t = raycast_segment(i, origin, dir);
    if (!t.has_value() || *t >= best_t) continue;
    const Vec3 p_local = spec_.segments[i].pose.inverse() * (origin + *t * dir);
    const double angle = std::atan2(p_local.y(), p_local.z());
    if (in_leak_hole(i, p_local.x(), angle)) {
      // beam enters the cutout and never returns
      best_t = *t;
      absorbed = true;
      continue;
    }
    best_t = *t;
    best_clutter = false;
    absorbed = false;
  }

  if (spec_.has_terrain && std::abs(dir.z()) > 1e-12) {
    const double t = (spec_.terrain_z_m - origin.z()) / dir.z();
    if (t > 1e-9 && t < best_t) {
      best_t = t;
      best_clutter = true;
      absorbed = false;
    }
  }

  if (!std::isfinite(best_t) || absorbed) {
    return std::nullopt;
  }
  SurfaceHit hit;
  hit.t = best_t;
  hit.point = origin + best_t * dir;
  hit.clutter = best_clutter;
  return hit;
}

Scene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  // conservative pairwise overlap check on sampled axis points
  for (std::size_t i = 0; i < spec.segments.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.segments.size(); ++j) {
      const CylinderSegment& a = spec.segments[i];
      const CylinderSegment& b = spec.segments[j];
      for (int k = 0; k <= 16; ++k) {
        const Vec3 pa = a.pose * Vec3(a.length_m * k / 16.0, 0, 0);
        // distance from pa to segment b's axis
        const Vec3 b0 = b.pose * Vec3(0, 0, 0);
        const Vec3 b1 = b.pose * Vec3(b.length_m, 0, 0);
        const Vec3 ab = b1 - b0;
        const double u =
            std::clamp((pa - b0).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
        if ((pa - (b0 + u * ab)).norm() < a.radius_m + b.radius_m) {
          throw InvalidSpecError("generate_scene: segments overlap");
        }
      }
    }
  }
  return Scene(spec, seed);
}

void TrajectorySpec::validate() const {
  if (!(duration_s > 0.0) || !(imu_rate_hz > 0.0) || !(dvl_rate_hz > 0.0)) {
    throw InvalidSpecError("TrajectorySpec: duration and rates must be > 0");
  }
  for (const OutageWindow& w : outages) {
    if (w.start_s < 0.0 || w.end_s > duration_s || !(w.end_s > w.start_s)) {
      throw InvalidSpecError("TrajectorySpec: outage outside duration");
    }
  }
}

Trajectory::Trajectory(const TrajectorySpec& spec, std::uint64_t seed)
    : spec_(spec) {
  spec_.validate();
  if (spec_.mode == MotionMode::kRotation) {
    spec_.speed_mps = 0.0;
    spec_.profile = SpeedProfile::kUniform;
  }
  if (spec_.profile == SpeedProfile::kVariable) {
    Rng rng(seed ^ 0x5eedf00dULL);
    const int knots = int(std::ceil(spec_.duration_s / knot_dt_)) + 2;
    knot_v_.resize(knots);
    knot_x_.resize(knots);
    knot_v_[0] = spec_.speed_mps;
    for (int k = 1; k < knots; ++k) {
      knot_v_[k] =
          std::clamp(knot_v_[k - 1] + 8e-4 * rng.normal(), 1e-3, 6e-3);
    }
    knot_x_[0] = 0.0;
    for (int k = 1; k < knots; ++k) {
      knot_x_[k] =
          knot_x_[k - 1] + 0.5 * (knot_v_[k - 1] + knot_v_[k]) * knot_dt_;
    }
  }
}

double Trajectory::forward_speed(double t, double* accel) const {
  if (spec_.profile == SpeedProfile::kUniform) {
    if (accel != nullptr) *accel = 0.0;
    return spec_.speed_mps;
  }
  const int k = std::min(int(knot_v_.size()) - 2,
                         std::max(0, int(std::floor(t / knot_dt_))));
  const double tau = t - k * knot_dt_;
  const double slope = (knot_v_[k + 1] - knot_v_[k]) / knot_dt_;
  if (accel != nullptr) *accel = slope;
  return knot_v_[k] + slope * tau;
}

double Trajectory::forward_distance(double t) const {
  if (spec_.profile == SpeedProfile::kUniform) {
    return spec_.speed_mps * t;
  }
  const int k = std::min(int(knot_v_.size()) - 2,
                         std::max(0, int(std::floor(t / knot_dt_))));
  const double tau = t - k * knot_dt_;
  const double slope = (knot_v_[k + 1] - knot_v_[k]) / knot_dt_;
  return knot_x_[k] + knot_v_[k] * tau + 0.5 * slope * tau * tau;
}

Vec3 Trajectory::position(double t) const {
  Vec3 p = spec_.start_pos_m + Vec3(forward_distance(t), 0.0, 0.0);
  for (int i = 0; i < 3; ++i) {
    p(i) += spec_.osc_amp_m(i) * std::sin(kTwoPi * spec_.osc_freq_hz(i) * t);
  }
  return p;
}

Vec3 Trajectory::velocity(double t) const {
  Vec3 v(forward_speed(t), 0.0, 0.0);
  for (int i = 0; i < 3; ++i) {
    const double w = kTwoPi * spec_.osc_freq_hz(i);
    v(i) += spec_.osc_amp_m(i) * w * std::cos(w * t);
  }
  return v;
}

Vec3 Trajectory::accel_world(double t) const {
  double a_fwd = 0.0;
  forward_speed(t, &a_fwd);
  Vec3 a(a_fwd, 0.0, 0.0);
  for (int i = 0; i < 3; ++i) {
    const double w = kTwoPi * spec_.osc_freq_hz(i);
    a(i) += -spec_.osc_amp_m(i) * w * w * std::sin(w * t);
  }
  return a;
}

Quat Trajectory::attitude(double t) const {
  const double yaw =
      spec_.yaw_amp_rad * std::sin(kTwoPi * spec_.yaw_freq_hz * t);
  return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
}

Vec3 Trajectory::body_rate(double t) const {
  const double w = kTwoPi * spec_.yaw_freq_hz;
  return {0.0, 0.0, spec_.yaw_amp_rad * w * std::cos(w * t)};
}

Vec3 Trajectory::body_accel(double t) const {
  return attitude(t).toRotationMatrix().transpose() * accel_world(t);
}

double Trajectory::servo_angle(double t) const {
  if (spec_.mode == MotionMode::kTranslation) {
    return 0.0;
  }
  const double u = std::clamp(t / spec_.duration_s, 0.0, 1.0);
  return spec_.servo_min_rad + (spec_.servo_max_rad - spec_.servo_min_rad) * u;
}

Mat3 Trajectory::body_to_camera() {
  Mat3 r;
  // camera x = body x, camera y = -body y, camera z = -body z (nadir view)
  r << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  return r;
}

geom::RigidTransform Trajectory::camera_pose(double t) const {
  return {attitude(t).toRotationMatrix() * body_to_camera(), position(t)};
}

SensorTraces synth_inertial_acoustic(const Trajectory& traj,
                                     const geom::RigidTransform& T_imu_dvl,
                                     std::uint64_t seed) {
  const TrajectorySpec& spec = traj.spec();
  Rng rng(seed);
  SensorTraces out;

  const int n_imu = int(std::floor(spec.duration_s * spec.imu_rate_hz));
  out.imu.reserve(n_imu);
  for (int i = 1; i <= n_imu; ++i) {
    const double t = i / spec.imu_rate_hz;
    fusion::ImuSample s;
    s.t = t;
    s.accel = traj.body_accel(t) + spec.accel_bias +
              spec.sigma_accel * rng.normal3();
    s.gyro = traj.body_rate(t) + spec.sigma_gyro * rng.normal3();
    out.imu.push_back(s);
  }

  const int n_dvl = int(std::floor(spec.duration_s * spec.dvl_rate_hz));
  out.dvl.reserve(n_dvl);
  for (int j = 1; j <= n_dvl; ++j) {
    const double t = j / spec.dvl_rate_hz;
    fusion::DvlSample s;
    s.t = t;
    const Vec3 v_body =
        traj.attitude(t).toRotationMatrix().transpose() * traj.velocity(t);
    s.velocity = T_imu_dvl.R.transpose() * v_body + spec.sigma_dvl * rng.normal3();
    s.health = 1;
    for (const OutageWindow& w : spec.outages) {
      if (t >= w.start_s && t <= w.end_s) {
        s.health = 0;
        break;
      }
    }
    out.dvl.push_back(s);
  }
  return out;
}

lightplane::LightPlane LaserRig::plane0_camera() const {
  const double c = std::cos(tilt_rad);
  const double s = std::sin(tilt_rad);
  // contains camera-y and the emitter point (baseline, 0, 0)
  return lightplane::LightPlane(c, 0.0, s, -baseline_m * c,
                                lightplane::Frame::kCamera);
}

lightplane::RotationAxis LaserRig::axis_camera() const {
  lightplane::RotationAxis axis;
  axis.direction = Vec3::UnitY();
  axis.point = Vec3(baseline_m, 0.0, 0.0);
  return axis;
}

lightplane::LightPlane LaserRig::plane_camera(double servo_rad) const {
  if (servo_rad == 0.0) {
    return plane0_camera();
  }
  return lightplane::rotate_plane(plane0_camera(), axis_camera(), servo_rad);
}

StripeProjection project_stripe(const Scene& scene,
                                const geom::RigidTransform& T_world_cam,
                                const lightplane::LightPlane& plane_cam,
                                const CameraRig& rig, const LaserRig& laser,
                                double pixel_noise_px, Rng* rng) {
  StripeProjection out;

  const Vec3 n_w = T_world_cam.R * plane_cam.normal();
  const Vec3 emitter_w = T_world_cam * Vec3(laser.baseline_m, 0.0, 0.0);

  // fan basis inside the plane, centered on the down-looking direction
  const Vec3 view_w = T_world_cam.R * Vec3::UnitZ();
  Vec3 f = view_w - view_w.dot(n_w) * n_w;
  if (f.norm() < 1e-9) {
    return out;  // plane perpendicular to the viewing axis: nothing usable
  }
  f.normalize();
  const Vec3 s = n_w.cross(f);

  const geom::RigidTransform T_cam_world = T_world_cam.inverse();

  for (int i = 0; i < laser.fan_rays; ++i) {
    const double phi = -laser.fan_half_angle_rad +
                       2.0 * laser.fan_half_angle_rad * i /
                           double(laser.fan_rays - 1);
    const Vec3 dir = std::cos(phi) * f + std::sin(phi) * s;
    const std::optional<SurfaceHit> hit = scene.raycast(emitter_w, dir);
    if (!hit.has_value()) continue;

    const Vec3 p_c = T_cam_world * hit->point;
    if (p_c.z() < 1e-6) continue;
    const Vec2 n(p_c.x() / p_c.z(), p_c.y() / p_c.z());
    Vec2 px = cam::normalized_to_pixel(cam::distort(n, rig.dist), rig.K);
    if (pixel_noise_px > 0.0 && rng != nullptr) {
      px += pixel_noise_px * Vec2(rng->normal(), rng->normal());
    }
    if (px.x() < 0.0 || px.y() < 0.0 || px.x() > rig.image_width - 1 ||
        px.y() > rig.image_height - 1) {
      continue;
    }
    out.frame.pixels.push_back(px);
    out.truth_world.push_back(hit->point);
    out.clutter.push_back(hit->clutter ? 1 : 0);
  }
  return out;
}

ScanData simulate_scan(const Scene& scene, const TrajectorySpec& traj_spec,
                       const ScanConfig& cfg, std::uint64_t seed) {
  const Trajectory traj(traj_spec, seed);
  ScanData out;
  out.traces = synth_inertial_acoustic(traj, cfg.T_imu_dvl, seed ^ 0xace1ULL);

  Rng rng(seed ^ 0xfaceULL);
  const int n_frames =
      int(std::floor(traj_spec.duration_s * cfg.frame_rate_hz)) + 1;
  const int mu = traj_spec.profile == SpeedProfile::kVariable ? 1 : 0;

  for (int k = 0; k < n_frames; ++k) {
    const double t = k / cfg.frame_rate_hz;
    const geom::RigidTransform T_wc = traj.camera_pose(t);
    const double servo = traj.servo_angle(t);
    StripeProjection proj =
        project_stripe(scene, T_wc, cfg.laser.plane_camera(servo), cfg.camera,
                       cfg.laser, cfg.pixel_noise_px, &rng);
    proj.frame.id = k;
    proj.frame.t = t;
    proj.frame.servo_angle = servo;
    proj.frame.motion_flag = mu;

    out.frames.push_back(std::move(proj.frame));
    out.poses.push_back({t, T_wc});
    FrameTruth truth;
    truth.world_points = std::move(proj.truth_world);
    truth.clutter = std::move(proj.clutter);
    out.truth.push_back(std::move(truth));
  }
  return out;
}

TargetFixture make_target_observation(
    const geom::RigidTransform& T_cam_target, double Y_A, double Y_B,
    double Y_C, double Y_D, double Y_Ap, double Y_Bp, double Y_Cp, double Y_Dp,
    double x_sep, const cam::Intrinsics& K, const cam::DistortionCoeffs& dist,
    double pixel_noise_px, Rng* rng) {
  TargetFixture out;
  const double ys[8] = {Y_A, Y_B, Y_C, Y_D, Y_Ap, Y_Bp, Y_Cp, Y_Dp};
  for (int i = 0; i < 8; ++i) {
    const double x = i < 4 ? 0.0 : x_sep;
    const Vec3 p_t(x, ys[i], 0.0);
    const Vec3 p_c = T_cam_target * p_t;
    if (p_c.z() <= 0.0) {
      throw InvalidArgument("make_target_observation: point behind camera");
    }
    out.points_camera_truth[i] = p_c;
    const Vec2 n(p_c.x() / p_c.z(), p_c.y() / p_c.z());
    Vec2 px = cam::normalized_to_pixel(cam::distort(n, dist), K);
    if (pixel_noise_px > 0.0 && rng != nullptr) {
      px += pixel_noise_px * Vec2(rng->normal(), rng->normal());
    }
    out.obs.pixels[i] = px;
  }
  out.obs.Y_A = Y_A;
  out.obs.Y_B = Y_B;
  out.obs.Y_D = Y_D;
  out.obs.Y_Ap = Y_Ap;
  out.obs.Y_Bp = Y_Bp;
  out.obs.Y_Dp = Y_Dp;
  out.obs.K = K;
  out.obs.dist = dist;

  out.plane_camera_truth = lightplane::LightPlane::from_normal_point(
      T_cam_target.R * Vec3::UnitZ(), T_cam_target * Vec3::Zero(),
      lightplane::Frame::kCamera);
  return out;
}

SilhouetteFixture render_cylinder_silhouette(double x0, double z0,
                                             double radius, double fx,
                                             double cx, double cy, int width,
                                             int height) {
  SilhouetteFixture out;
  out.image.width = width;
  out.image.height = height;
  out.image.px.assign(std::size_t(width) * height, 0.f);

  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const double xn = (u - cx) / fx;
      const double a = xn * xn + 1.0;
      const double b = -2.0 * (xn * x0 + z0);
      const double c = x0 * x0 + z0 * z0 - radius * radius;
      const double disc = b * b - 4.0 * a * c;
      if (disc >= 0.0 && (-b + std::sqrt(disc)) / (2.0 * a) > 0.0) {
        out.image.at(u, v) = 1.f;
      }
    }
  }

  // soften edges so the gradient ridge sits on the silhouette boundary
  for (int pass = 0; pass < 2; ++pass) {
    recon::GrayImage blurred = out.image;
    for (int v = 1; v < height - 1; ++v) {
      for (int u = 1; u < width - 1; ++u) {
        float acc = 0.f;
        const float k[3] = {0.25f, 0.5f, 0.25f};
        for (int oy = -1; oy <= 1; ++oy) {
          for (int ox = -1; ox <= 1; ++ox) {
            acc += k[ox + 1] * k[oy + 1] * out.image.at(u + ox, v + oy);
          }
        }
        blurred.at(u, v) = acc;
      }
    }
    out.image = blurred;
  }

  // analytic tangent columns
  const double D = x0 * x0 + z0 * z0 - radius * radius;
  const double a = x0 * x0 - D;
  const double b = 2.0 * x0 * z0;
  const double c = z0 * z0 - D;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0 || std::abs(a) < 1e-15) {
    throw InvalidArgument("render_cylinder_silhouette: camera inside cylinder");
  }
  const double r1 = (-b - std::sqrt(disc)) / (2.0 * a);
  const double r2 = (-b + std::sqrt(disc)) / (2.0 * a);
  out.u_left = fx * std::min(r1, r2) + cx;
  out.u_right = fx * std::max(r1, r2) + cx;
  return out;
}

}  // namespace sim
}  // namespace uwsl
