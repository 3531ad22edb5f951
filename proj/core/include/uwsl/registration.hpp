// SPDX-License-Identifier: Apache-2.0
//
// Edge-gated point-cloud registration: pose-guided pre-alignment, kd-tree
// correspondences, overlap-adaptive rejection threshold and weighted rigid
// estimation, plus the plain-ICP baseline obtained by neutralizing every
// enhancement, and nearest-neighbor RMSE evaluation.

#pragma once

#include <memory>
#include <vector>

#include "uwsl/geometry.hpp"
#include "uwsl/recon.hpp"

namespace uwsl {
namespace edicp {

using geom::RigidTransform;
using recon::PointCloud;

/// Static 3-d tree over a point set; the index is immutable once built.
class KdTree3 {
 public:
  explicit KdTree3(const std::vector<Vec3>& points);

  struct Hit {
    std::size_t index = 0;
    double distance = 0.0;
  };

  /// Nearest neighbor; the tree must be non-empty.
  Hit nearest(const Vec3& query) const;

  std::size_t size() const { return points_.size(); }

 private:
  struct Node;
  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;

  int build(std::size_t lo, std::size_t hi, int depth);
  void search(int node, const Vec3& q, Hit& best) const;
};

struct Correspondence {
  std::size_t source = 0;
  std::size_t target = 0;
  double distance = 0.0;  ///< m
  double weight = 1.0;    ///< (0, 1]
};

struct RegistrationConfig {
  int max_iterations = 50;
  double tolerance = 1e-8;      ///< transform-change norm
  double overlap_lo = 0.5;      ///< quantile clamp bounds
  double overlap_hi = 0.95;
  bool baseline = false;        ///< plain ICP: uniform weights, no threshold
  bool force_uniform_weights = false;
  bool force_infinite_threshold = false;
};

struct RegistrationResult {
  RigidTransform T;  ///< source -> target
  std::vector<double> rmse_trace;  ///< per accepted iteration, m
  std::vector<double> threshold_trace;  ///< rejection threshold per iteration
  std::vector<double> overlap_trace;    ///< overlap estimate per iteration
  double overlap = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct PrealignResult {
  RigidTransform T;
  bool aligned = false;  ///< false when a reference pose was missing
};

/// Initial guess from the fused reference poses of the two clouds:
/// T_target^-1 * T_source.
PrealignResult prealign(const std::vector<recon::FramePose>& source_poses,
                        const std::vector<recon::FramePose>& target_poses);

/// Rejection threshold from the nearest-neighbor distance distribution:
/// the overlap fraction (distances below 3x median) clamped to
/// [overlap_lo, overlap_hi] picks the quantile. Throws InvalidArgument on
/// empty input.
double adaptive_threshold(const std::vector<double>& nn_distances,
                          double overlap_lo = 0.5, double overlap_hi = 0.95,
                          double* overlap_out = nullptr);

/// Weighted rigid fit minimizing sum w_i |T s_i - t_i|^2 with det(R) = +1.
/// Throws DegenerateInput for collinear or coincident geometry.
RigidTransform estimate_weighted_transform(
    const std::vector<Correspondence>& corrs,
    const std::vector<Vec3>& source_points,
    const std::vector<Vec3>& target_points);

/// Full registration loop. Throws NoOverlapError when thresholding leaves
/// no correspondences.
RegistrationResult register_clouds(const PointCloud& source,
                                   const PointCloud& target,
                                   const RegistrationConfig& cfg,
                                   const RigidTransform& initial);

/// RMSE of nearest-neighbor distances from a to b; the symmetric variant
/// takes the larger of both directions.
double cloud_rmse(const PointCloud& a, const PointCloud& b,
                  bool symmetric = false);

}  // namespace edicp
}  // namespace uwsl
