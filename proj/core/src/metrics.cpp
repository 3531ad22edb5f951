// SPDX-License-Identifier: Apache-2.0

#include "uwsl/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>

#include "uwsl/errors.hpp"

namespace uwsl {
namespace metrics {

ErrorStats error_stats(const std::vector<double>& errors) {
  if (errors.empty()) {
    throw InvalidArgument("error_stats: empty error vector");
  }
  ErrorStats s;
  double sum = 0.0, sum_abs = 0.0, sum_sq = 0.0;
  for (double e : errors) {
    sum += e;
    sum_abs += std::abs(e);
    sum_sq += e * e;
    s.max_error = std::max(s.max_error, std::abs(e));
  }
  const double n = double(errors.size());
  const double mean = sum / n;
  s.mae = sum_abs / n;
  s.rmse = std::sqrt(sum_sq / n);
  s.sd = std::sqrt(std::max(0.0, sum_sq / n - mean * mean));
  return s;
}

std::array<ErrorStats, 3> trajectory_errors(
    const std::vector<fusion::NavState>& states,
    const std::function<Vec3(double)>& truth_position) {
  std::array<std::vector<double>, 3> errs;
  for (const fusion::NavState& s : states) {
    const Vec3 e = s.p - truth_position(s.t);
    for (int i = 0; i < 3; ++i) {
      errs[i].push_back(e(i));
    }
  }
  return {error_stats(errs[0]), error_stats(errs[1]), error_stats(errs[2])};
}

CircleFit fit_circle_yz(const std::vector<Vec3>& points) {
  if (points.size() < 3) {
    throw InvalidArgument("fit_circle_yz: need >= 3 points");
  }
  // Kasa fit: solve [2y 2z 1] [y0 z0 k] = y^2 + z^2.
  Eigen::MatrixXd A(points.size(), 3);
  Eigen::VectorXd b(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double y = points[i].y(), z = points[i].z();
    A(Eigen::Index(i), 0) = 2.0 * y;
    A(Eigen::Index(i), 1) = 2.0 * z;
    A(Eigen::Index(i), 2) = 1.0;
    b(Eigen::Index(i)) = y * y + z * z;
  }
  const Eigen::Vector3d sol =
      A.colPivHouseholderQr().solve(b);
  CircleFit fit;
  fit.y0 = sol(0);
  fit.z0 = sol(1);
  fit.radius = std::sqrt(std::max(0.0, sol(2) + sol(0) * sol(0) + sol(1) * sol(1)));

  // one Gauss-Newton step on the geometric residuals
  for (int iter = 0; iter < 2; ++iter) {
    Eigen::MatrixXd J(points.size(), 3);
    Eigen::VectorXd r(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double dy = points[i].y() - fit.y0;
      const double dz = points[i].z() - fit.z0;
      const double d = std::hypot(dy, dz);
      if (d < 1e-12) {
        continue;
      }
      r(Eigen::Index(i)) = d - fit.radius;
      J(Eigen::Index(i), 0) = -dy / d;
      J(Eigen::Index(i), 1) = -dz / d;
      J(Eigen::Index(i), 2) = -1.0;
    }
    const Eigen::Vector3d step = J.colPivHouseholderQr().solve(-r);
    fit.y0 += step(0);
    fit.z0 += step(1);
    fit.radius += step(2);
  }

  double ss = 0.0;
  for (const Vec3& p : points) {
    const double d = std::hypot(p.y() - fit.y0, p.z() - fit.z0) - fit.radius;
    ss += d * d;
  }
  fit.rms = std::sqrt(ss / double(points.size()));
  return fit;
}

double axial_extent(const std::vector<Vec3>& points) {
  if (points.empty()) {
    throw InvalidArgument("axial_extent: empty cloud");
  }
  double lo = points.front().x(), hi = lo;
  for (const Vec3& p : points) {
    lo = std::min(lo, p.x());
    hi = std::max(hi, p.x());
  }
  return hi - lo;
}

double defect_height(const std::vector<Vec3>& points, const CircleFit& base,
                     double x_lo, double x_hi, double sign, double cell_m,
                     int min_cell_points) {
  struct Cell {
    double sum = 0.0;
    int n = 0;
  };
  std::map<std::pair<long, long>, Cell> grid;
  for (const Vec3& p : points) {
    if (p.x() < x_lo || p.x() > x_hi) continue;
    const double dy = p.y() - base.y0;
    const double dz = p.z() - base.z0;
    const double dev = std::hypot(dy, dz) - base.radius;
    const double arc = base.radius * std::atan2(dy, dz);
    const long ix = long(std::floor(p.x() / cell_m));
    const long ia = long(std::floor(arc / cell_m));
    Cell& c = grid[{ix, ia}];
    c.sum += sign * dev;
    c.n += 1;
  }
  double best = 0.0;
  for (const auto& [key, cell] : grid) {
    if (cell.n < min_cell_points) continue;
    best = std::max(best, cell.sum / cell.n);
  }
  return best;
}

}  // namespace metrics
}  // namespace uwsl
