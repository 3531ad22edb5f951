// SPDX-License-Identifier: Apache-2.0
//
// Synthetic scene and sensor generator: pipe scenes with surface defects,
// laser-stripe projection with exact ground truth, analytic trajectories,
// and IMU/DVL traces with seeded noise and dropout windows. Everything is
// deterministic for a fixed (spec, seed).

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "uwsl/camera.hpp"
#include "uwsl/fusion.hpp"
#include "uwsl/geometry.hpp"
#include "uwsl/light_plane.hpp"
#include "uwsl/recon.hpp"

namespace uwsl {
namespace sim {

/// Seeded generator with an explicit normal transform so streams are
/// reproducible independent of the standard library build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();  ///< [0, 1)
  double normal();   ///< N(0, 1), Box-Muller
  Vec3 normal3();

 private:
  std::mt19937_64 engine_;
};

enum class DefectType { kLeak, kDepression, kAttachment };

struct Defect {
  DefectType type = DefectType::kAttachment;
  std::size_t segment = 0;
  double axial_m = 0.0;    ///< position along the segment axis
  double angle_rad = 0.0;  ///< around the circumference, 0 = +Z top
  double size_m = 0.01;    ///< bump height or leak hole radius
  double sigma_m = 0.008;  ///< bump footprint (Gaussian sigma)
};

/// Cylinder along the +X axis of its local frame, base circle at x = 0.
struct CylinderSegment {
  double radius_m = 0.05;
  double length_m = 0.6;
  geom::RigidTransform pose;  ///< local -> world
};

struct SceneSpec {
  std::vector<CylinderSegment> segments;
  std::vector<Defect> defects;
  double terrain_z_m = 0.0;
  bool has_terrain = true;

  void validate() const;  ///< radius > 0, defect size < radius
};

struct SurfaceHit {
  Vec3 point = Vec3::Zero();
  double t = 0.0;
  bool clutter = false;  ///< terrain rather than pipe
};

class Scene {
 public:
  Scene(SceneSpec spec, std::uint64_t seed);

  const SceneSpec& spec() const { return spec_; }

  /// Local surface radius of a segment at (axial, angle), bumps included.
  double surface_radius(std::size_t segment, double axial,
                        double angle) const;

  /// True when (axial, angle) falls inside a leak cutout.
  bool in_leak_hole(std::size_t segment, double axial, double angle) const;

  /// Radial deviation of a world point from the defected surface of the
  /// nearest segment (zero on the surface; exact for clean cylinders).
  double surface_level(const Vec3& p_world) const;

  /// First surface hit along a world-frame ray, pipe and terrain combined.
  std::optional<SurfaceHit> raycast(const Vec3& origin, const Vec3& dir) const;

 private:
  SceneSpec spec_;
  double max_bump_ = 0.0;

  std::optional<double> raycast_segment(std::size_t idx, const Vec3& o,
                                        const Vec3& d) const;
};

/// Throws InvalidSpecError when segments overlap.
Scene generate_scene(const SceneSpec& spec, std::uint64_t seed);

enum class MotionMode { kTranslation, kRotation, kTranslationRotation };
enum class SpeedProfile { kUniform, kVariable };

struct OutageWindow {
  double start_s = 0.0;
  double end_s = 0.0;
};

struct TrajectorySpec {
  MotionMode mode = MotionMode::kTranslation;
  SpeedProfile profile = SpeedProfile::kUniform;
  double speed_mps = 0.003;
  double duration_s = 60.0;
  double imu_rate_hz = 200.0;
  double dvl_rate_hz = 10.0;
  double sigma_accel = 0.0;  ///< m/s^2 per axis
  double sigma_gyro = 0.0;   ///< rad/s per axis
  double sigma_dvl = 0.0;    ///< m/s per axis
  Vec3 accel_bias = Vec3::Zero();  ///< body frame, m/s^2
  std::vector<OutageWindow> outages;

  double servo_min_rad = 0.0;  ///< sweep range, rotation modes
  double servo_max_rad = 0.0;

  // optional trajectory enrichment (position sinusoids + yaw wobble)
  Vec3 osc_amp_m = Vec3::Zero();
  Vec3 osc_freq_hz = Vec3::Zero();
  double yaw_amp_rad = 0.0;
  double yaw_freq_hz = 0.0;

  Vec3 start_pos_m = Vec3(0.0, 0.0, 0.45);

  void validate() const;
};

/// Closed-form trajectory: position, derivatives and attitude are evaluated
/// analytically, so sensor samples are exact up to the injected noise.
class Trajectory {
 public:
  Trajectory(const TrajectorySpec& spec, std::uint64_t seed);

  const TrajectorySpec& spec() const { return spec_; }

  Vec3 position(double t) const;
  Vec3 velocity(double t) const;
  Vec3 accel_world(double t) const;
  Quat attitude(double t) const;  ///< body -> world
  Vec3 body_rate(double t) const;
  Vec3 body_accel(double t) const;
  double servo_angle(double t) const;

  /// Camera -> world pose; the camera looks down (+z camera = -z world at
  /// identity attitude).
  geom::RigidTransform camera_pose(double t) const;

  static Mat3 body_to_camera();

 private:
  TrajectorySpec spec_;
  double knot_dt_ = 2.0;
  std::vector<double> knot_v_;
  std::vector<double> knot_x_;

  double forward_speed(double t, double* accel = nullptr) const;
  double forward_distance(double t) const;
};

struct SensorTraces {
  std::vector<fusion::ImuSample> imu;
  std::vector<fusion::DvlSample> dvl;
};

/// IMU/DVL streams for a trajectory; DVL health drops to zero inside the
/// outage windows. The DVL->body extrinsic rotates the sampled velocity.
SensorTraces synth_inertial_acoustic(const Trajectory& traj,
                                     const geom::RigidTransform& T_imu_dvl,
                                     std::uint64_t seed);

struct CameraRig {
  cam::Intrinsics K{1638.3357, 1638.1088, -0.2092, 1023.1856, 750.9077};
  cam::DistortionCoeffs dist;
  int image_width = 2048;
  int image_height = 1504;
};

struct LaserRig {
  double baseline_m = 0.10;   ///< emitter offset along camera x
  double tilt_rad = -0.17;    ///< plane tilt about the servo axis at zero
  double fan_half_angle_rad = 0.75;
  int fan_rays = 2400;

  /// Laser plane at servo angle zero, camera frame.
  lightplane::LightPlane plane0_camera() const;
  /// Servo rotation axis (through the emitter, along camera y).
  lightplane::RotationAxis axis_camera() const;
  /// Plane at a given servo angle.
  lightplane::LightPlane plane_camera(double servo_rad) const;
};

struct StripeProjection {
  recon::StripeFrame frame;
  std::vector<Vec3> truth_world;   ///< one per emitted pixel
  std::vector<std::uint8_t> clutter;  ///< 1 = terrain return
};

/// Projects the plane-surface intersection curve into the camera. Stripe
/// pixels are exact projections (distortion applied) of analytic surface
/// points; optional Gaussian pixel noise perturbs the pixels only.
StripeProjection project_stripe(const Scene& scene,
                                const geom::RigidTransform& T_world_cam,
                                const lightplane::LightPlane& plane_cam,
                                const CameraRig& rig, const LaserRig& laser,
                                double pixel_noise_px = 0.0,
                                Rng* rng = nullptr);

struct ScanConfig {
  CameraRig camera;
  LaserRig laser;
  double frame_rate_hz = 25.0;
  double pixel_noise_px = 0.0;
  geom::RigidTransform T_imu_dvl;
};

struct FrameTruth {
  std::vector<Vec3> world_points;
  std::vector<std::uint8_t> clutter;
};

struct ScanData {
  std::vector<recon::StripeFrame> frames;
  std::vector<recon::FramePose> poses;  ///< truth camera->world per frame
  std::vector<FrameTruth> truth;
  SensorTraces traces;
};

/// Full scan: stripe frames at the frame rate plus sensor traces, all from
/// one trajectory.
ScanData simulate_scan(const Scene& scene, const TrajectorySpec& traj_spec,
                       const ScanConfig& cfg, std::uint64_t seed);

struct TargetFixture {
  lightplane::TargetObservation obs;
  lightplane::LightPlane plane_camera_truth;
  std::array<Vec3, 8> points_camera_truth{};
};

/// Two-line calibration target observation. Marks sit at the given heights
/// on the X = 0 and X = x_sep edges of the target plane (target frame
/// z = 0); Y_C / Y_Cp are the laser crossings withheld from the observation.
TargetFixture make_target_observation(
    const geom::RigidTransform& T_cam_target, double Y_A, double Y_B,
    double Y_C, double Y_D, double Y_Ap, double Y_Bp, double Y_Cp,
    double Y_Dp, double x_sep, const cam::Intrinsics& K,
    const cam::DistortionCoeffs& dist, double pixel_noise_px = 0.0,
    Rng* rng = nullptr);

struct SilhouetteFixture {
  recon::GrayImage image;
  double u_left = 0.0;   ///< analytic silhouette columns, px
  double u_right = 0.0;
};

/// Renders a cylinder (axis along camera y) against a dark background and
/// reports the analytic tangent-line columns.
SilhouetteFixture render_cylinder_silhouette(double x0, double z0,
                                             double radius, double fx,
                                             double cx, double cy, int width,
                                             int height);

}  // namespace sim
}  // namespace uwsl
