// SPDX-License-Identifier: Apache-2.0

#include "uwsl/registration.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "uwsl/errors.hpp"

namespace uwsl {
namespace edicp {

struct KdTree3::Node {
  int left = -1;
  int right = -1;
  std::size_t lo = 0;  // leaf payload range in order_
  std::size_t hi = 0;
  int axis = 0;
  double split = 0.0;
};

KdTree3::KdTree3(const std::vector<Vec3>& points) : points_(points) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / 8 + 8);
    build(0, points_.size(), 0);
  }
}

int KdTree3::build(std::size_t lo, std::size_t hi, int depth) {
  const int id = int(nodes_.size());
  nodes_.emplace_back();
  constexpr std::size_t kLeafSize = 8;
  if (hi - lo <= kLeafSize) {
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;
    return id;
  }
  const int axis = depth % 3;
  const std::size_t mid = (lo + hi) / 2;
  std::nth_element(order_.begin() + lo, order_.begin() + mid,
                   order_.begin() + hi,
                   [&](std::size_t a, std::size_t b) {
                     return points_[a](axis) < points_[b](axis);
                   });
  nodes_[id].axis = axis;
  nodes_[id].split = points_[order_[mid]](axis);
  nodes_[id].lo = nodes_[id].hi = 0;
  const int l = build(lo, mid, depth + 1);
  const int r = build(mid, hi, depth + 1);
  nodes_[id].left = l;
  nodes_[id].right = r;
  return id;
}

void KdTree3::search(int node, const Vec3& q, Hit& best) const {
  const Node& n = nodes_[node];
  if (n.left < 0) {
    for (std::size_t i = n.lo; i < n.hi; ++i) {
      const double d = (points_[order_[i]] - q).norm();
      if (d < best.distance) {
        best.distance = d;
        best.index = order_[i];
      }
    }
    return;
  }
  const double delta = q(n.axis) - n.split;
  const int near = delta < 0.0 ? n.left : n.right;
  const int far = delta < 0.0 ? n.right : n.left;
  search(near, q, best);
  if (std::abs(delta) < best.distance) {
    search(far, q, best);
  }
}

KdTree3::Hit KdTree3::nearest(const Vec3& query) const {
  if (points_.empty()) {
    throw InvalidArgument("KdTree3::nearest: empty tree");
  }
  Hit best;
  best.distance = std::numeric_limits<double>::infinity();
  search(0, query, best);
  return best;
}

PrealignResult prealign(const std::vector<recon::FramePose>& source_poses,
                        const std::vector<recon::FramePose>& target_poses) {
  PrealignResult out;
  if (source_poses.empty() || target_poses.empty()) {
    out.T = RigidTransform::Identity();
    out.aligned = false;
    return out;
  }
  out.T = target_poses.front().T.inverse() * source_poses.front().T;
  out.aligned = true;
  return out;
}

double adaptive_threshold(const std::vector<double>& nn_distances,
                          double overlap_lo, double overlap_hi,
                          double* overlap_out) {
  if (nn_distances.empty()) {
    throw InvalidArgument("adaptive_threshold: empty distance set");
  }
  std::vector<double> sorted = nn_distances;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = sorted[(n - 1) / 2];

  std::size_t close = 0;
  for (double d : sorted) {
    if (d < 3.0 * median) ++close;
  }
  const double overlap = double(close) / double(n);
  if (overlap_out != nullptr) {
    *overlap_out = overlap;
  }

  const double q = std::clamp(overlap, overlap_lo, overlap_hi);
  // nearest-rank quantile
  const std::size_t rank =
      std::min(n - 1, std::size_t(std::ceil(q * double(n))) -
                          (q > 0.0 ? 1 : 0));
  return sorted[rank];
}

RigidTransform estimate_weighted_transform(
    const std::vector<Correspondence>& corrs,
    const std::vector<Vec3>& source_points,
    const std::vector<Vec3>& target_points) {
  if (corrs.size() < 3) {
    throw DegenerateInput("estimate_weighted_transform: need >= 3 pairs");
  }
  double wsum = 0.0;
  Vec3 cs = Vec3::Zero(), ct = Vec3::Zero();
  for (const Correspondence& c : corrs) {
    wsum += c.weight;
    cs += c.weight * source_points[c.source];
    ct += c.weight * target_points[c.target];
  }
  if (!(wsum > 0.0)) {
    throw InvalidArgument("estimate_weighted_transform: zero total weight");
  }
  cs /= wsum;
  ct /= wsum;

  Mat3 H = Mat3::Zero();
  for (const Correspondence& c : corrs) {
    H += c.weight * (source_points[c.source] - cs) *
         (target_points[c.target] - ct).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double s0 = svd.singularValues()(0);
  if (!(s0 > 0.0) || svd.singularValues()(1) < 1e-12 * s0) {
    throw DegenerateInput(
        "estimate_weighted_transform: degenerate correspondence geometry");
  }
  Mat3 D = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) {
    D(2, 2) = -1.0;
  }
  const Mat3 R = svd.matrixV() * D * svd.matrixU().transpose();
  return RigidTransform(R, ct - R * cs);
}

namespace {

double transform_change(const RigidTransform& delta) {
  return geom::so3_log(delta.R).norm() + delta.t.norm();
}

}  // namespace

RegistrationResult register_clouds(const PointCloud& source,
                                   const PointCloud& target,
                                   const RegistrationConfig& cfg,
                                   const RigidTransform& initial) {
  if (source.size() < 3 || target.size() < 3) {
    throw InvalidArgument("register_clouds: clouds need >= 3 points");
  }
  if (cfg.max_iterations < 1 || !(cfg.tolerance > 0.0)) {
    throw InvalidArgument("register_clouds: bad iteration settings");
  }
  const bool uniform = cfg.baseline || cfg.force_uniform_weights;
  const bool no_threshold = cfg.baseline || cfg.force_infinite_threshold;

  const KdTree3 tree(target.points);
  RegistrationResult out;
  out.T = initial;

  std::vector<Vec3> moved(source.size());
  double last_rmse = std::numeric_limits<double>::infinity();
  RigidTransform before_step = out.T;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    for (std::size_t i = 0; i < source.size(); ++i) {
      moved[i] = out.T * source.points[i];
    }

    std::vector<double> dists(source.size());
    std::vector<std::size_t> nn(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) {
      const KdTree3::Hit hit = tree.nearest(moved[i]);
      dists[i] = hit.distance;
      nn[i] = hit.index;
    }

    double overlap = 1.0;
    double threshold = std::numeric_limits<double>::infinity();
    if (!no_threshold) {
      threshold =
          adaptive_threshold(dists, cfg.overlap_lo, cfg.overlap_hi, &overlap);
    }

    std::vector<Correspondence> corrs;
    corrs.reserve(source.size());
    double dbar = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (dists[i] <= threshold) {
        Correspondence c;
        c.source = i;
        c.target = nn[i];
        c.distance = dists[i];
        corrs.push_back(c);
        dbar += dists[i];
      }
    }
    if (corrs.empty()) {
      throw NoOverlapError("register_clouds: no correspondences survive");
    }
    dbar /= double(corrs.size());

    double ss = 0.0;
    for (Correspondence& c : corrs) {
      if (uniform || dbar <= 0.0) {
        c.weight = 1.0;
      } else {
        c.weight = 1.0 / (1.0 + c.distance / dbar);
      }
      ss += c.distance * c.distance;
    }
    const double rmse = std::sqrt(ss / double(corrs.size()));

    if (rmse > last_rmse + 1e-12) {
      out.T = before_step;  // roll back the step that made things worse
      break;
    }
    last_rmse = rmse;
    out.rmse_trace.push_back(rmse);
    out.threshold_trace.push_back(threshold);
    out.overlap_trace.push_back(overlap);
    out.overlap = overlap;
    out.iterations = iter + 1;

    const RigidTransform delta =
        estimate_weighted_transform(corrs, moved, target.points);
    before_step = out.T;
    out.T = delta * out.T;

    if (transform_change(delta) < cfg.tolerance) {
      out.converged = true;
      break;
    }
  }
  return out;
}

double cloud_rmse(const PointCloud& a, const PointCloud& b, bool symmetric) {
  if (a.points.empty() || b.points.empty()) {
    throw InvalidArgument("cloud_rmse: empty cloud");
  }
  auto directed = [](const PointCloud& from, const PointCloud& to) {
    const KdTree3 tree(to.points);
    double ss = 0.0;
    for (const Vec3& p : from.points) {
      const double d = tree.nearest(p).distance;
      ss += d * d;
    }
    return std::sqrt(ss / double(from.points.size()));
  };
  const double ab = directed(a, b);
  if (!symmetric) {
    return ab;
  }
  return std::max(ab, directed(b, a));
}

}  // namespace edicp
}  // namespace uwsl
