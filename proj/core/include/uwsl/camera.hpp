// SPDX-License-Identifier: Apache-2.0
//
// Pinhole camera model: intrinsics, Brown-Conrady forward distortion,
// the fast iterative undistortion, and the flat-port refraction model
// with its optimal lens standoff search.

#pragma once

#include <vector>

#include "uwsl/geometry.hpp"

namespace uwsl {
namespace cam {

struct Intrinsics {
  double fx = 1.0;  ///< focal length, px
  double fy = 1.0;  ///< focal length, px
  double skew = 0.0;
  double cx = 0.0;  ///< principal point, px
  double cy = 0.0;

  void validate() const;  // fx > 0, fy > 0, all finite
};

/// Radial (k1,k2,k3) and tangential (l1,l2) coefficients on normalized
/// coordinates.
struct DistortionCoeffs {
  double k1 = 0.0;
  double k2 = 0.0;
  double k3 = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;

  bool is_zero() const {
    return k1 == 0.0 && k2 == 0.0 && k3 == 0.0 && l1 == 0.0 && l2 == 0.0;
  }
};

/// Flat-port geometry: lens -> glass -> water, with the three ray angles
/// tied together by Snell's law.
struct RefractionGeometry {
  double d0 = 0.0;       ///< lens to inner glass surface, m
  double d1 = 0.0;       ///< glass thickness, m
  double n_air = 1.0;    ///< refractive indices
  double n_glass = 1.5;
  double n_water = 1.333;
  double alpha = 0.0;    ///< in-air incidence angle, rad
  double beta = 0.0;     ///< in-glass angle, rad
  double delta = 0.0;    ///< in-water angle, rad

  /// Builds a Snell-consistent geometry from the in-air incidence angle.
  static RefractionGeometry from_incidence(double alpha, double d0, double d1,
                                           double n_air, double n_glass,
                                           double n_water);

  void validate() const;
};

/// Virtual standoff d0' and refraction error (d0 + d1) - d0'.
struct RefractionError {
  double d0_virtual = 0.0;  ///< m
  double delta_d = 0.0;     ///< m
};

struct UndistortResult {
  Vec2 point = Vec2::Zero();
  int iterations = 0;
  bool converged = false;
};

struct StandoffResult {
  double d0 = 0.0;        ///< m
  bool degenerate = false;  ///< true when any d0 fits equally well
};

/// Forward Brown-Conrady distortion on a normalized image point.
Vec2 distort(const Vec2& p, const DistortionCoeffs& c);

/// Inverts the distortion by stepping from the observed point along the
/// current displacement estimate. Converges when re-distorting the iterate
/// reproduces the observation within tol.
/// Throws DivergenceError after three consecutively growing residuals.
UndistortResult undistort_fdc(const Vec2& p_dist, const DistortionCoeffs& c,
                              int max_iter = 50, double tol = 1e-6);

Vec2 pixel_to_normalized(const Vec2& p_px, const Intrinsics& K);
Vec2 normalized_to_pixel(const Vec2& p_n, const Intrinsics& K);

/// Evaluates the flat-port error model for one ray.
/// Throws InvalidArgument when any angle reaches pi/2.
RefractionError refraction_error(const RefractionGeometry& g);

/// Finds the standoff d0 in [d0_min, d0_max] that minimizes the variance of
/// the refraction error over a fan of in-air incidence angles.
/// Throws InvalidArgument on an empty fan.
StandoffResult optimize_d0(const std::vector<double>& alphas, double d1,
                           double n_air, double n_glass, double n_water,
                           double d0_min, double d0_max);

}  // namespace cam
}  // namespace uwsl
