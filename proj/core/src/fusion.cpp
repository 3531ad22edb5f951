// SPDX-License-Identifier: Apache-2.0

#include "uwsl/fusion.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "uwsl/errors.hpp"

namespace uwsl {
namespace fusion {

namespace {

void check_psd(const MatX& m, const char* name) {
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw InvalidArgument(std::string(name) + " must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatX> es(m);
  if (es.eigenvalues().minCoeff() < -1e-12) {
    throw InvalidArgument(std::string(name) + " must be positive semidefinite");
  }
}

// Error-state retraction: [dp, dv, dtheta] onto the nominal state.
NavState inject(const NavState& s, const Eigen::Matrix<double, 9, 1>& d) {
  NavState out = s;
  out.p += d.segment<3>(0);
  out.v += d.segment<3>(3);
  out.q = (s.q * geom::quat_from_rotation_vector(d.segment<3>(6))).normalized();
  return out;
}

// Error of b relative to a in the tangent at a.
Eigen::Matrix<double, 9, 1> state_diff(const NavState& b, const NavState& a) {
  Eigen::Matrix<double, 9, 1> d;
  d.segment<3>(0) = b.p - a.p;
  d.segment<3>(3) = b.v - a.v;
  d.segment<3>(6) = geom::quat_to_rotation_vector(a.q.conjugate() * b.q);
  return d;
}

void symmetrize(Mat9& P) { P = (0.5 * (P + P.transpose())).eval(); }

// Clamp negative eigenvalues introduced by the covariance adjustments.
void enforce_psd_floor(Mat9& P) {
  Eigen::SelfAdjointEigenSolver<Mat9> es(P);
  if (es.eigenvalues().minCoeff() >= -1e-12) {
    return;
  }
  Eigen::Matrix<double, 9, 1> ev = es.eigenvalues().cwiseMax(0.0);
  P = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  symmetrize(P);
}

NavState ekf_impl(const NavState& s, const ImuSample& imu,
                  const ImuSample& imu_prev,
                  const std::optional<DvlSample>& dvl, const FilterConfig& cfg,
                  bool adaptive, StepDiag* diag) {
  const double dt = imu.t - s.t;
  NavState pred = propagate_dr(s, imu, imu_prev, dt);

  // A = df/d(error state), G = df/d(imu inputs), central differences.
  const double h = cfg.fd_step;
  Mat9 A;
  for (int j = 0; j < 9; ++j) {
    Eigen::Matrix<double, 9, 1> e = Eigen::Matrix<double, 9, 1>::Zero();
    e(j) = h;
    const NavState xp = propagate_dr(inject(s, e), imu, imu_prev, dt);
    e(j) = -h;
    const NavState xm = propagate_dr(inject(s, e), imu, imu_prev, dt);
    A.col(j) = state_diff(xp, xm) / (2.0 * h);
  }
  Mat96 G;
  for (int j = 0; j < 6; ++j) {
    ImuSample up = imu, um = imu;
    if (j < 3) {
      up.accel(j) += h;
      um.accel(j) -= h;
    } else {
      up.gyro(j - 3) += h;
      um.gyro(j - 3) -= h;
    }
    const NavState xp = propagate_dr(s, up, imu_prev, dt);
    const NavState xm = propagate_dr(s, um, imu_prev, dt);
    G.col(j) = state_diff(xp, xm) / (2.0 * h);
  }

  pred.P = A * s.P * A.transpose() + G * cfg.Q * G.transpose();
  symmetrize(pred.P);

  if (!dvl.has_value()) {
    return pred;
  }

  // Measurement: world-rotated DVL velocity observing v directly, so
  // H = [0 I 0] and the noise rotates through V = R(q) R_ID.
  const Mat3 V = pred.q.toRotationMatrix() * cfg.T_imu_dvl.R;
  const Vec3 z = V * dvl->velocity;
  const Vec3 innovation = z - pred.v;

  const Mat3 S = pred.P.block<3, 3>(3, 3) + V * cfg.R * V.transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> es(S);
  const double ev_min = es.eigenvalues().minCoeff();
  const double ev_max = es.eigenvalues().maxCoeff();
  if (!(ev_min > 0.0) || ev_max / ev_min > 1e14) {
    throw NumericalError("ekf_step: innovation covariance singular",
                         ev_min > 0.0 ? ev_max / ev_min
                                      : std::numeric_limits<double>::infinity());
  }
  const Mat3 S_inv = S.inverse();

  Eigen::Matrix<double, 9, 3> K = pred.P.middleCols<3>(3) * S_inv;
  const Eigen::Matrix<double, 9, 1> delta = K * innovation;

  NavState updated = inject(pred, delta);
  updated.t = pred.t;

  // P = (I - K H) P-  with H = [0 I 0].
  Mat9 IKH = Mat9::Identity();
  IKH.middleCols<3>(3) -= K;
  Mat9 P_new = IKH * pred.P;

  double kn = 0.0;
  double eta = 0.0;
  if (adaptive) {
    for (int i = 0; i < 3; ++i) {
      kn += innovation(i) * innovation(i) / S(i, i);
    }
    kn /= 3.0;
    eta = cfg.force_eta_zero ? 0.0 : adaptive_eta(kn, cfg.km);
    if (eta != 0.0) {
      Mat9 KH = Mat9::Zero();
      KH.middleCols<3>(3) = K;
      P_new -= eta * (KH * pred.P);
    }
  }

  symmetrize(P_new);
  enforce_psd_floor(P_new);
  updated.P = P_new;

  if (diag != nullptr) {
    diag->t = imu.t;
    diag->updated = true;
    diag->kn = kn;
    diag->eta = eta;
  }
  return updated;
}

}  // namespace

FilterConfig FilterConfig::defaults() {
  FilterConfig cfg;
  cfg.Q = Mat6::Zero();
  cfg.Q.diagonal() << 1e-3, 1e-3, 1e-3, 1e-5, 1e-5, 1e-5;
  cfg.R = 1e-4 * Mat3::Identity();
  cfg.km = 2.0;
  cfg.P0 = 1e-6 * Mat9::Identity();
  return cfg;
}

void FilterConfig::validate() const {
  check_psd(Q, "FilterConfig.Q");
  check_psd(R, "FilterConfig.R");
  check_psd(P0, "FilterConfig.P0");
  if (!(km > 0.1)) {
    throw InvalidArgument("FilterConfig.km must exceed 0.1");
  }
}

std::vector<std::vector<std::size_t>> sync_streams(
    const std::vector<std::vector<double>>& stream_times, double tolerance) {
  std::vector<std::vector<std::size_t>> out;
  if (stream_times.empty()) {
    return out;
  }
  std::size_t anchor = 0;
  for (std::size_t i = 1; i < stream_times.size(); ++i) {
    if (stream_times[i].size() < stream_times[anchor].size()) {
      anchor = i;
    }
  }
  if (stream_times[anchor].empty()) {
    return out;
  }

  // Monotone cursors keep every sample matched at most once.
  std::vector<std::size_t> next(stream_times.size(), 0);

  for (std::size_t ai = 0; ai < stream_times[anchor].size(); ++ai) {
    const double ta = stream_times[anchor][ai];
    std::vector<std::size_t> tuple(stream_times.size());
    tuple[anchor] = ai;
    bool ok = true;
    std::vector<std::size_t> candidate(stream_times.size(), 0);
    for (std::size_t si = 0; si < stream_times.size() && ok; ++si) {
      if (si == anchor) continue;
      const std::vector<double>& ts = stream_times[si];
      std::size_t j = next[si];
      while (j + 1 < ts.size() && ts[j + 1] <= ta) ++j;
      std::size_t best = j;
      if (j + 1 < ts.size() &&
          std::abs(ts[j + 1] - ta) < std::abs(ts[j] - ta)) {
        best = j + 1;
      }
      if (best >= ts.size() || std::abs(ts[best] - ta) > tolerance) {
        ok = false;
        break;
      }
      candidate[si] = best;
      tuple[si] = best;
    }
    if (!ok) continue;
    out.push_back(tuple);
    for (std::size_t si = 0; si < stream_times.size(); ++si) {
      if (si != anchor) next[si] = candidate[si] + 1;
    }
  }
  return out;
}

NavState propagate_dr(const NavState& s, const ImuSample& imu,
                      const ImuSample& imu_prev, double dt) {
  if (!(dt > 0.0)) {
    throw InvalidArgument("propagate_dr: dt must be positive");
  }
  const Mat3 R = s.q.toRotationMatrix();
  const Vec3 a_world_prev = R * imu_prev.accel;
  const Vec3 jerk = (R * imu.accel - a_world_prev) / dt;
  const Vec3 alpha = (imu.gyro - imu_prev.gyro) / dt;

  NavState out = s;
  out.t = s.t + dt;
  out.p = s.p + s.v * dt + 0.5 * a_world_prev * dt * dt +
          (1.0 / 6.0) * jerk * dt * dt * dt;
  out.v = s.v + a_world_prev * dt;

  const Quat dq1 = geom::quat_multiply(s.q, imu_prev.gyro);
  const Quat dq2 = geom::quat_multiply(s.q, alpha);
  Quat q(s.q.w() + 0.5 * dq1.w() * dt + 0.25 * dq2.w() * dt * dt,
         s.q.x() + 0.5 * dq1.x() * dt + 0.25 * dq2.x() * dt * dt,
         s.q.y() + 0.5 * dq1.y() * dt + 0.25 * dq2.y() * dt * dt,
         s.q.z() + 0.5 * dq1.z() * dt + 0.25 * dq2.z() * dt * dt);
  out.q = q.normalized();
  return out;
}

NavState dvl_correct(const NavState& propagated, const DvlSample& dvl,
                     const FilterConfig& cfg, DvlTrack& track) {
  if (dvl.health == 0) {
    track.active = false;
    return propagated;
  }
  const Vec3 v_world =
      propagated.q.toRotationMatrix() * (cfg.T_imu_dvl.R * dvl.velocity);

  NavState out = propagated;
  if (!track.active) {
    track.active = true;
    track.anchor = propagated.p;
    track.displacement = Vec3::Zero();
  } else {
    const double dt = dvl.t - track.prev_t;
    track.displacement += 0.5 * (v_world + track.prev_velocity_world) * dt;
  }
  track.prev_t = dvl.t;
  track.prev_velocity_world = v_world;

  out.v = v_world;
  out.p = track.anchor + track.displacement;
  return out;
}

double adaptive_eta(double kn, double km) {
  if (kn > km) {
    return 1.0 / (kn + 1e-8) - 1.0;
  }
  if (kn > 0.1 && kn < km) {
    return kn;
  }
  return 0.0;
}

NavState ekf_step(const NavState& s, const ImuSample& imu,
                  const ImuSample& imu_prev,
                  const std::optional<DvlSample>& dvl, const FilterConfig& cfg,
                  StepDiag* diag) {
  return ekf_impl(s, imu, imu_prev, dvl, cfg, /*adaptive=*/false, diag);
}

NavState aekf_step(const NavState& s, const ImuSample& imu,
                   const ImuSample& imu_prev,
                   const std::optional<DvlSample>& dvl, const FilterConfig& cfg,
                   StepDiag* diag) {
  return ekf_impl(s, imu, imu_prev, dvl, cfg, /*adaptive=*/true, diag);
}

FusionRun run_fusion(const std::vector<ImuSample>& imu,
                     const std::vector<DvlSample>& dvl, const NavState& init,
                     const FilterConfig& cfg, FusionMethod method) {
  cfg.validate();
  FusionRun run;
  run.states.reserve(imu.size());

  NavState state = init;
  state.P = cfg.P0;
  DvlTrack track;
  std::size_t di = 0;

  for (std::size_t i = 0; i < imu.size(); ++i) {
    const ImuSample& cur = imu[i];
    if (!(cur.t > state.t)) {
      run.states.push_back(state);
      continue;
    }
    const ImuSample& prev = (i == 0) ? cur : imu[i - 1];
    const double dt = cur.t - state.t;

    std::optional<DvlSample> meas;
    while (di < dvl.size() && dvl[di].t <= cur.t) {
      if (method == FusionMethod::kDeadReckoning) {
        // handled below so the correction sees the propagated state
        break;
      }
      if (dvl[di].health == 1 && !meas.has_value()) {
        meas = dvl[di];
      }
      ++di;
    }

    switch (method) {
      case FusionMethod::kDeadReckoning: {
        state = propagate_dr(state, cur, prev, dt);
        while (di < dvl.size() && dvl[di].t <= cur.t) {
          state = dvl_correct(state, dvl[di], cfg, track);
          ++di;
        }
        break;
      }
      case FusionMethod::kEkf: {
        StepDiag d;
        state = ekf_step(state, cur, prev, meas, cfg, &d);
        if (d.updated) run.diags.push_back(d);
        break;
      }
      case FusionMethod::kAekf: {
        StepDiag d;
        state = aekf_step(state, cur, prev, meas, cfg, &d);
        if (d.updated) run.diags.push_back(d);
        break;
      }
    }
    run.states.push_back(state);
  }
  return run;
}

}  // namespace fusion
}  // namespace uwsl
