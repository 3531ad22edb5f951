// SPDX-License-Identifier: Apache-2.0

#include "uwsl/camera.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "uwsl/errors.hpp"

namespace uwsl {
namespace cam {

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(skew) ||
      !std::isfinite(cx) || !std::isfinite(cy)) {
    throw InvalidArgument("Intrinsics: fx, fy must be positive and finite");
  }
}

RefractionGeometry RefractionGeometry::from_incidence(double alpha, double d0,
                                                      double d1, double n_air,
                                                      double n_glass,
                                                      double n_water) {
  RefractionGeometry g;
  g.d0 = d0;
  g.d1 = d1;
  g.n_air = n_air;
  g.n_glass = n_glass;
  g.n_water = n_water;
  g.alpha = alpha;
  g.beta = std::asin(n_air * std::sin(alpha) / n_glass);
  g.delta = std::asin(n_air * std::sin(alpha) / n_water);
  g.validate();
  return g;
}

void RefractionGeometry::validate() const {
  if (!(n_water > n_air)) {
    throw InvalidArgument("RefractionGeometry: n_water must exceed n_air");
  }
  const double half_pi = 0.5 * M_PI;
  for (double a : {alpha, beta, delta}) {
    if (!(a > 0.0) || !(a < half_pi)) {
      throw InvalidArgument(
          "RefractionGeometry: angles must lie strictly in (0, pi/2)");
    }
  }
  const double s0 = n_air * std::sin(alpha);
  if (std::abs(s0 - n_glass * std::sin(beta)) > 1e-9 ||
      std::abs(s0 - n_water * std::sin(delta)) > 1e-9) {
    throw InvalidArgument("RefractionGeometry: Snell consistency violated");
  }
}

Vec2 distort(const Vec2& p, const DistortionCoeffs& c) {
  if (!p.allFinite()) {
    throw InvalidArgument("distort: non-finite point");
  }
  const double x = p.x(), y = p.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (c.k1 + r2 * (c.k2 + r2 * c.k3));
  return {x * radial + 2.0 * c.l1 * x * y + c.l2 * (r2 + 2.0 * x * x),
          y * radial + 2.0 * c.l2 * x * y + c.l1 * (r2 + 2.0 * y * y)};
}

UndistortResult undistort_fdc(const Vec2& p_dist, const DistortionCoeffs& c,
                              int max_iter, double tol) {
  if (max_iter < 1 || !(tol > 0.0)) {
    throw InvalidArgument("undistort_fdc: max_iter >= 1 and tol > 0 required");
  }
  if (!p_dist.allFinite()) {
    throw InvalidArgument("undistort_fdc: non-finite point");
  }

  UndistortResult out;
  Vec2 p = p_dist;  // first guess: the observation itself
  double prev_residual = std::numeric_limits<double>::infinity();
  int growth_streak = 0;

  for (int m = 1; m <= max_iter; ++m) {
    out.iterations = m;
    const Vec2 p_fwd = distort(p, c);
    const double residual = (p_fwd - p_dist).norm();
    if (residual <= tol) {
      out.point = p;
      out.converged = true;
      return out;
    }
    if (residual > prev_residual) {
      if (++growth_streak >= 3) {
        std::ostringstream os;
        os << "undistort_fdc: diverging at (" << p_dist.x() << ", "
           << p_dist.y() << ")";
        throw DivergenceError(os.str());
      }
    } else {
      growth_streak = 0;
    }
    prev_residual = residual;

    // Step from the observation along the current displacement estimate.
    const Vec2 step = p - p_fwd;
    const double d = step.norm();
    if (d < std::numeric_limits<double>::min()) {
      break;  // no displacement left to follow
    }
    p = p_dist + step;
  }

  out.point = p;
  out.converged = false;
  return out;
}

Vec2 pixel_to_normalized(const Vec2& p_px, const Intrinsics& K) {
  K.validate();
  const double y = (p_px.y() - K.cy) / K.fy;
  const double x = (p_px.x() - K.cx - K.skew * y) / K.fx;
  return {x, y};
}

Vec2 normalized_to_pixel(const Vec2& p_n, const Intrinsics& K) {
  K.validate();
  return {K.fx * p_n.x() + K.skew * p_n.y() + K.cx, K.fy * p_n.y() + K.cy};
}

RefractionError refraction_error(const RefractionGeometry& g) {
  const double half_pi = 0.5 * M_PI;
  if (g.alpha >= half_pi || g.beta >= half_pi || g.delta >= half_pi) {
    throw InvalidArgument("refraction_error: angle at or beyond pi/2");
  }
  RefractionError e;
  e.d0_virtual =
      std::tan(g.delta) * (g.d0 * std::tan(g.alpha) + g.d1 * std::tan(g.beta));
  e.delta_d = (g.d0 + g.d1) - e.d0_virtual;
  return e;
}

namespace {

// Spread of the refraction error across the fan, as a function of d0.
double error_variance(const std::vector<RefractionGeometry>& fan, double d0) {
  double sum = 0.0, sum2 = 0.0;
  for (const RefractionGeometry& base : fan) {
    RefractionGeometry g = base;
    g.d0 = d0;
    const double dd = refraction_error(g).delta_d;
    sum += dd;
    sum2 += dd * dd;
  }
  const double n = static_cast<double>(fan.size());
  const double mean = sum / n;
  return sum2 / n - mean * mean;
}

}  // namespace

StandoffResult optimize_d0(const std::vector<double>& alphas, double d1,
                           double n_air, double n_glass, double n_water,
                           double d0_min, double d0_max) {
  if (alphas.empty()) {
    throw InvalidArgument("optimize_d0: empty ray fan");
  }
  if (!(d0_max > d0_min)) {
    throw InvalidArgument("optimize_d0: empty search interval");
  }

  std::vector<RefractionGeometry> fan;
  fan.reserve(alphas.size());
  for (double a : alphas) {
    fan.push_back(
        RefractionGeometry::from_incidence(a, d0_min, d1, n_air, n_glass,
                                           n_water));
  }

  StandoffResult out;

  // All rays at the same angle leave the spread at zero for every d0.
  const double a0 = alphas.front();
  const bool all_same = std::all_of(alphas.begin(), alphas.end(), [&](double a) {
    return std::abs(a - a0) < 1e-15;
  });
  if (alphas.size() < 2 || all_same) {
    out.d0 = 0.5 * (d0_min + d0_max);
    out.degenerate = true;
    return out;
  }

  // Coarse grid, then golden-section refinement around the best cell.
  constexpr int kGrid = 256;
  int best = 0;
  double best_v = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kGrid; ++i) {
    const double d0 = d0_min + (d0_max - d0_min) * i / kGrid;
    const double v = error_variance(fan, d0);
    if (v < best_v) {
      best_v = v;
      best = i;
    }
  }
  double lo = d0_min + (d0_max - d0_min) * std::max(0, best - 1) / kGrid;
  double hi = d0_min + (d0_max - d0_min) * std::min(kGrid, best + 1) / kGrid;

  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - gr * (hi - lo);
  double d = lo + gr * (hi - lo);
  double fc = error_variance(fan, c);
  double fd = error_variance(fan, d);
  while (hi - lo > 1e-12) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - gr * (hi - lo);
      fc = error_variance(fan, c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + gr * (hi - lo);
      fd = error_variance(fan, d);
    }
  }
  out.d0 = 0.5 * (lo + hi);
  return out;
}

}  // namespace cam
}  // namespace uwsl
