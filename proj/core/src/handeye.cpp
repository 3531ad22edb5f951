// SPDX-License-Identifier: Apache-2.0

#include "uwsl/handeye.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "uwsl/errors.hpp"

namespace uwsl {
namespace handeye {

namespace {

constexpr double kDeg = M_PI / 180.0;

// Stacked whitened residuals; whitening via the Cholesky factor of sigma.
VecX whitened_residuals(const RigidTransform& X,
                        const std::vector<PosePair>& pairs,
                        const std::vector<Eigen::LLT<Mat6>>& llts,
                        bool* near_pi = nullptr) {
  VecX r(6 * static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Twist xi = residual(X, pairs[i]);
    if (near_pi != nullptr && xi.tail<3>().norm() > M_PI - 1e-6) {
      *near_pi = true;
    }
    r.segment<6>(6 * static_cast<Eigen::Index>(i)) =
        llts[i].matrixL().solve(xi);
  }
  return r;
}

void check_observability(const std::vector<PosePair>& pairs) {
  if (pairs.size() < 3) {
    throw ObservabilityError("calibrate: need at least 3 pose pairs");
  }
  std::vector<Vec3> axes;
  for (const PosePair& p : pairs) {
    const Vec3 phi = geom::so3_log(p.T_C.R);
    if (phi.norm() > 1e-6) {
      axes.push_back(phi.normalized());
    }
  }
  bool spread = false;
  for (std::size_t i = 0; i + 1 < axes.size() && !spread; ++i) {
    for (std::size_t j = i + 1; j < axes.size(); ++j) {
      const double c = std::min(1.0, std::abs(axes[i].dot(axes[j])));
      if (std::acos(c) > 1.0 * kDeg) {
        spread = true;
        break;
      }
    }
  }
  if (!spread) {
    throw ObservabilityError(
        "calibrate: rotation axes parallel within 1 degree; X unobservable");
  }
}

}  // namespace

Mat6 default_pair_covariance() {
  Mat6 s = Mat6::Identity();
  const double sigma_t = 5e-3;
  const double sigma_r = 0.5 * kDeg;
  s.topLeftCorner<3, 3>() *= sigma_t * sigma_t;
  s.bottomRightCorner<3, 3>() *= sigma_r * sigma_r;
  return s;
}

RigidTransform predict_dvl_motion(const RigidTransform& X,
                                  const RigidTransform& T_C) {
  return X.inverse() * T_C * X;
}

Twist residual(const RigidTransform& X, const PosePair& pair) {
  return geom::log_se3(pair.T_D.inverse() * predict_dvl_motion(X, pair.T_C));
}

CalibrationResult calibrate(const std::vector<PosePair>& pairs,
                            const RigidTransform& X0, const LmConfig& config) {
  check_observability(pairs);

  std::vector<Eigen::LLT<Mat6>> llts;
  llts.reserve(pairs.size());
  for (const PosePair& p : pairs) {
    if ((p.sigma - p.sigma.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
      throw InvalidArgument("calibrate: pair covariance not symmetric");
    }
    Eigen::LLT<Mat6> llt(p.sigma);
    if (llt.info() != Eigen::Success) {
      throw InvalidArgument("calibrate: pair covariance not positive definite");
    }
    llts.push_back(llt);
  }

  CalibrationResult out;
  RigidTransform X = X0;
  bool near_pi = false;

  VecX r = whitened_residuals(X, pairs, llts, &near_pi);
  double cost = r.squaredNorm();
  out.cost_trace.push_back(cost);

  double lambda = config.lambda0;
  const double h = config.fd_step;
  int iter = 0;

  for (; iter < config.max_iterations; ++iter) {
    // Central-difference Jacobian on the 6-D tangent at X.
    MatX J(r.size(), 6);
    for (int j = 0; j < 6; ++j) {
      Twist e = Twist::Zero();
      e(j) = h;
      const VecX rp = whitened_residuals(X * geom::exp_se3(e), pairs, llts);
      e(j) = -h;
      const VecX rm = whitened_residuals(X * geom::exp_se3(e), pairs, llts);
      J.col(j) = (rp - rm) / (2.0 * h);
    }

    const Mat6 JtJ = (J.transpose() * J).eval();
    const Vec6 g = J.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() < config.gradient_tol) {
      break;
    }

    bool accepted = false;
    while (!accepted) {
      Mat6 A = JtJ;
      A.diagonal() += lambda * JtJ.diagonal();
      const Vec6 delta = A.ldlt().solve(-g);
      if (!delta.allFinite()) {
        lambda *= 10.0;
        if (lambda > 1e12) break;
        continue;
      }
      if (delta.norm() < config.step_tol) {
        break;
      }
      const RigidTransform X_try = X * geom::exp_se3(delta);
      const VecX r_try = whitened_residuals(X_try, pairs, llts, &near_pi);
      const double cost_try = r_try.squaredNorm();
      if (cost_try < cost) {
        X = X_try;
        r = r_try;
        cost = cost_try;
        out.cost_trace.push_back(cost);
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
      } else {
        lambda *= 10.0;
        if (lambda > 1e12) break;
      }
    }
    if (!accepted) {
      break;  // stalled: neither a useful step nor a smaller cost
    }
  }

  X.R = geom::orthonormalize(X.R);
  out.X = X;
  out.final_cost = cost;
  out.iterations = iter;
  out.near_pi_branch = near_pi;
  out.residual_norms.reserve(pairs.size());
  for (const PosePair& p : pairs) {
    out.residual_norms.push_back(residual(X, p).norm());
  }
  return out;
}

}  // namespace handeye
}  // namespace uwsl
