// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include "splatjoint/metrics.hpp"

#include <cmath>

#include "splatjoint/kdtree.hpp"

namespace splatjoint {

double axis_angle_error(const JointParams& pred, const JointParams& gt) {
  const double c = std::min(1.0, std::abs(pred.axis.normalized().dot(gt.axis.normalized())));
  return std::acos(c) * 180.0 / M_PI;
}

double axis_pos_error(const JointParams& pred, const JointParams& gt) {
  if (pred.kind != JointKind::Revolute || gt.kind != JointKind::Revolute)
    throw NotRevolute("axis position error is defined for revolute joints only");
  const Vec3 d1 = pred.axis.normalized();
  const Vec3 d2 = gt.axis.normalized();
  const Vec3 p1 = pred.pivot;
  const Vec3 p2 = gt.pivot;
  const Vec3 n = d1.cross(d2);
  const double n_norm = n.norm();
  double dist;
  if (n_norm < 1e-12) {
    // Parallel lines: point-to-line distance.
    const Vec3 delta = p2 - p1;
    dist = (delta - delta.dot(d1) * d1).norm();
  } else {
    dist = std::abs(n.dot(p2 - p1)) / n_norm;
  }
  return dist / 0.1;
}

double part_motion_error(const SE3Transform& pred, const SE3Transform& gt, JointKind kind) {
  if (kind == JointKind::Revolute)
    return geodesic_angle(pred.rotation, gt.rotation) * 180.0 / M_PI;
  return (pred.translation - gt.translation).norm();
}

namespace {

double directed_mean_nn(const std::vector<Vec3>& from, const KdTree3& tree) {
  std::vector<double> d(from.size());
  parallel_for(from.size(), [&](std::size_t i) { d[i] = std::sqrt(tree.nearest(from[i]).dist2); });
  double sum = 0.0;
  for (double v : d) sum += v;
  return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer_l1(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.empty() || b.empty()) throw EmptySet("chamfer distance needs nonempty point sets");
  const KdTree3 tree_a(a);
  const KdTree3 tree_b(b);
  return 0.5 * (directed_mean_nn(a, tree_b) + directed_mean_nn(b, tree_a));
}

}  // namespace splatjoint
