// SPDX-License-Identifier: Apache-2.0
//
// Evaluation metrics: per-axis trajectory error statistics, cylinder fits
// and defect-height recovery on reconstructed clouds.

#pragma once

#include <array>
#include <functional>
#include <vector>

#include "uwsl/fusion.hpp"
#include "uwsl/recon.hpp"

namespace uwsl {
namespace metrics {

struct ErrorStats {
  double mae = 0.0;
  double max_error = 0.0;
  double sd = 0.0;
  double rmse = 0.0;
};

ErrorStats error_stats(const std::vector<double>& errors);

/// Per-axis position error statistics against a truth sampler.
std::array<ErrorStats, 3> trajectory_errors(
    const std::vector<fusion::NavState>& states,
    const std::function<Vec3(double)>& truth_position);

struct CircleFit {
  double y0 = 0.0;
  double z0 = 0.0;
  double radius = 0.0;
  double rms = 0.0;
};

/// Algebraic circle fit in the (y, z) projection with one geometric
/// refinement step; for clouds of pipes whose axis runs along world x.
CircleFit fit_circle_yz(const std::vector<Vec3>& points);

/// Extent of the cloud along the x axis, m.
double axial_extent(const std::vector<Vec3>& points);

/// Largest binned mean radial deviation from the base circle inside the
/// axial window [x_lo, x_hi]; sign +1 measures outward bumps, -1 inward.
double defect_height(const std::vector<Vec3>& points, const CircleFit& base,
                     double x_lo, double x_hi, double sign,
                     double cell_m = 2e-3, int min_cell_points = 4);

}  // namespace metrics
}  // namespace uwsl
