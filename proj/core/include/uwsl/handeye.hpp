// SPDX-License-Identifier: Apache-2.0
//
// Camera-DVL extrinsic calibration from paired relative motions.
// Solves X from T_C * X = X * T_D by Levenberg-Marquardt on Lie-algebra
// residuals, weighted per pair by a 6x6 covariance.

#pragma once

#include <vector>

#include "uwsl/geometry.hpp"

namespace uwsl {
namespace handeye {

using geom::RigidTransform;
using geom::Twist;

/// One matched pair of relative motions (frame i-1 -> i).
struct PosePair {
  RigidTransform T_C;  ///< camera relative motion
  RigidTransform T_D;  ///< DVL relative motion
  Mat6 sigma = Mat6::Identity();  ///< residual covariance (m^2, rad^2 blocks)
};

struct LmConfig {
  int max_iterations = 100;
  double gradient_tol = 1e-10;
  double step_tol = 1e-12;
  double lambda0 = 1e-3;
  double fd_step = 1e-7;  ///< tangent-space finite-difference step
};

struct CalibrationResult {
  RigidTransform X;  ///< camera -> DVL extrinsic
  double final_cost = 0.0;
  int iterations = 0;
  std::vector<double> residual_norms;  ///< per pair, at the solution
  std::vector<double> cost_trace;      ///< accepted-step costs, non-increasing
  bool near_pi_branch = false;  ///< some residual composed close to angle pi
};

/// Default per-pair covariance: diag(sigma_t^2 I3, sigma_r^2 I3) with
/// sigma_t = 5 mm, sigma_r = 0.5 deg.
Mat6 default_pair_covariance();

/// DVL relative motion predicted by the extrinsic: X^-1 * T_C * X.
RigidTransform predict_dvl_motion(const RigidTransform& X,
                                  const RigidTransform& T_C);

/// Lie-algebra residual log(T_D^-1 * predict(X, T_C)).
Twist residual(const RigidTransform& X, const PosePair& pair);

/// Weighted LM solve over all pairs. Requires >= 3 pairs whose camera
/// rotation axes are not all parallel within 1 degree.
/// Throws ObservabilityError / InvalidArgument accordingly.
CalibrationResult calibrate(const std::vector<PosePair>& pairs,
                            const RigidTransform& X0,
                            const LmConfig& config = {});

}  // namespace handeye
}  // namespace uwsl
