// SPDX-License-Identifier: Apache-2.0
//
// Inertial-acoustic pose estimation: multi-stream timestamp matching,
// dead-reckoning propagation with jerk terms, health-gated DVL correction,
// and an error-state EKF with an innovation-driven adaptive covariance
// variant.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uwsl/geometry.hpp"

namespace uwsl {
namespace fusion {

using Mat9 = Eigen::Matrix<double, 9, 9>;
using Mat96 = Eigen::Matrix<double, 9, 6>;

struct ImuSample {
  double t = 0.0;        ///< s
  Vec3 accel = Vec3::Zero();  ///< body frame, gravity-compensated, m/s^2
  Vec3 gyro = Vec3::Zero();   ///< body frame, rad/s
};

struct DvlSample {
  double t = 0.0;             ///< s
  Vec3 velocity = Vec3::Zero();  ///< DVL frame, m/s
  int health = 1;             ///< 1 healthy, 0 dropout
};

/// Filter state. The 9x9 covariance is over the error state
/// [dp, dv, dtheta] with dtheta a body-frame attitude perturbation.
struct NavState {
  double t = 0.0;
  Vec3 p = Vec3::Zero();      ///< world, m
  Vec3 v = Vec3::Zero();      ///< world, m/s
  Quat q = Quat::Identity();  ///< body -> world
  Mat9 P = Mat9::Zero();
};

struct FilterConfig {
  /// IMU input noise, diag(accel variance x3, gyro variance x3).
  Mat6 Q = Mat6::Identity();
  /// DVL velocity noise in the DVL frame, (m/s)^2.
  Mat3 R = Mat3::Identity();
  double km = 2.0;  ///< adaptive threshold
  Mat9 P0 = Mat9::Identity();
  geom::RigidTransform T_imu_dvl;  ///< DVL -> IMU (body) frame
  bool force_eta_zero = false;     ///< pin the adaptive factor at zero
  double fd_step = 1e-5;           ///< Jacobian finite-difference step

  static FilterConfig defaults();
  void validate() const;
};

/// Per-update diagnostics of the adaptive branch.
struct StepDiag {
  double t = 0.0;
  bool updated = false;
  double kn = 0.0;
  double eta = 0.0;
};

/// For each sample of the slowest stream, indices of the nearest-in-time
/// sample of every stream, when all lie within tolerance. Streams must be
/// time-sorted; no sample is matched twice.
std::vector<std::vector<std::size_t>> sync_streams(
    const std::vector<std::vector<double>>& stream_times, double tolerance);

/// One dead-reckoning step: position with the 1/6 j dt^3 jerk term, velocity
/// with the rotated specific force, quaternion with first- and second-order
/// rate terms, renormalized. Jerk and angular acceleration are backward
/// differences of the two samples. Covariance is carried unchanged.
/// Throws InvalidArgument when dt <= 0.
NavState propagate_dr(const NavState& s, const ImuSample& imu,
                      const ImuSample& imu_prev, double dt);

/// Running trapezoidal integral of world-rotated DVL velocity; the anchor
/// reseeds at the first healthy sample after a dropout.
struct DvlTrack {
  bool active = false;
  Vec3 anchor = Vec3::Zero();
  Vec3 displacement = Vec3::Zero();
  double prev_t = 0.0;
  Vec3 prev_velocity_world = Vec3::Zero();
};

/// Health-gated absolute correction applied on top of a propagated state:
/// health 0 returns the state unchanged; health 1 replaces velocity with the
/// world-rotated DVL velocity and position with the track integral.
NavState dvl_correct(const NavState& propagated, const DvlSample& dvl,
                     const FilterConfig& cfg, DvlTrack& track);

/// Piecewise adaptive factor from the innovation consistency ratio.
double adaptive_eta(double kn, double km);

/// EKF predict (+ optional DVL velocity update). Jacobians of the
/// propagation map are taken by central differences on the error state and
/// the IMU inputs. Throws NumericalError when the innovation covariance is
/// numerically singular.
NavState ekf_step(const NavState& s, const ImuSample& imu,
                  const ImuSample& imu_prev,
                  const std::optional<DvlSample>& dvl,
                  const FilterConfig& cfg, StepDiag* diag = nullptr);

/// Same as ekf_step with the eta-adjusted covariance update.
NavState aekf_step(const NavState& s, const ImuSample& imu,
                   const ImuSample& imu_prev,
                   const std::optional<DvlSample>& dvl,
                   const FilterConfig& cfg, StepDiag* diag = nullptr);

enum class FusionMethod { kDeadReckoning, kEkf, kAekf };

struct FusionRun {
  std::vector<NavState> states;  ///< one per IMU sample
  std::vector<StepDiag> diags;   ///< one per measurement update
  std::string kn_normalization = "trace(diag(Pa)./diag(Pe)) / meas_dim";
};

/// Runs a full trace through the chosen method. DVL samples are consumed at
/// the first IMU step at or after their timestamp; unhealthy samples never
/// trigger filter updates.
FusionRun run_fusion(const std::vector<ImuSample>& imu,
                     const std::vector<DvlSample>& dvl, const NavState& init,
                     const FilterConfig& cfg, FusionMethod method);

}  // namespace fusion
}  // namespace uwsl
