// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "splatjoint/common.hpp"

namespace splatjoint {

/// Exact static 3D kd-tree. Median split, branchless-ish queries; good enough
/// for desk-scale point sets (<= a few hundred thousand points).
class KdTree3 {
 public:
  KdTree3() = default;

  explicit KdTree3(std::vector<Vec3> points) : points_(std::move(points)) {
    ids_.resize(points_.size());
    std::iota(ids_.begin(), ids_.end(), 0);
    if (!points_.empty()) build(0, points_.size(), 0);
  }

  std::size_t size() const { return points_.size(); }

  struct Hit {
    int index = -1;
    double dist2 = std::numeric_limits<double>::infinity();
  };

  /// Nearest neighbor; tree must be nonempty.
  Hit nearest(const Vec3& q) const {
    Hit best;
    search(q, 0, points_.size(), 0, best);
    return best;
  }

  /// All points within radius (inclusive), returned in index order.
  std::vector<int> radius(const Vec3& q, double r) const {
    std::vector<int> out;
    if (points_.empty()) return out;
    radius_search(q, 0, points_.size(), 0, r * r, out);
    std::sort(out.begin(), out.end());
    return out;
  }

  const Vec3& point(int original_index) const { return points_by_id_.empty()
      ? points_[original_index] : points_by_id_[original_index]; }

 private:
  // Nodes are implicit: the subtree over [lo, hi) stores its median at the
  // midpoint, split axis cycles with depth.
  void build(std::size_t lo, std::size_t hi, int axis) {
    if (hi - lo <= 1) return;
    const std::size_t mid = (lo + hi) / 2;
    const auto cmp = [&](int a, int b) { return points_[a][axis] < points_[b][axis]; };
    // Sort ids, then keep a parallel array so queries touch contiguous memory.
    std::nth_element(ids_.begin() + lo, ids_.begin() + mid, ids_.begin() + hi, cmp);
    build(lo, mid, (axis + 1) % 3);
    build(mid + 1, hi, (axis + 1) % 3);
    if (lo == 0 && hi == points_.size() && points_by_id_.empty()) {
      points_by_id_ = points_;
      std::vector<Vec3> reordered(points_.size());
      for (std::size_t i = 0; i < ids_.size(); ++i) reordered[i] = points_[ids_[i]];
      points_.swap(reordered);
    }
  }

  void search(const Vec3& q, std::size_t lo, std::size_t hi, int axis, Hit& best) const {
    if (lo >= hi) return;
    const std::size_t mid = (lo + hi) / 2;
    const double d2 = (points_[mid] - q).squaredNorm();
    if (d2 < best.dist2 || (d2 == best.dist2 && ids_[mid] < best.index)) {
      best.dist2 = d2;
      best.index = ids_[mid];
    }
    if (hi - lo == 1) return;
    const double delta = q[axis] - points_[mid][axis];
    const int next_axis = (axis + 1) % 3;
    if (delta < 0.0) {
      search(q, lo, mid, next_axis, best);
      if (delta * delta <= best.dist2) search(q, mid + 1, hi, next_axis, best);
    } else {
      search(q, mid + 1, hi, next_axis, best);
      if (delta * delta <= best.dist2) search(q, lo, mid, next_axis, best);
    }
  }

  void radius_search(const Vec3& q, std::size_t lo, std::size_t hi, int axis, double r2,
                     std::vector<int>& out) const {
    if (lo >= hi) return;
    const std::size_t mid = (lo + hi) / 2;
    if ((points_[mid] - q).squaredNorm() <= r2) out.push_back(ids_[mid]);
    if (hi - lo == 1) return;
    const double delta = q[axis] - points_[mid][axis];
    const int next_axis = (axis + 1) % 3;
    if (delta < 0.0 || delta * delta <= r2) radius_search(q, lo, mid, next_axis, r2, out);
    if (delta >= 0.0 || delta * delta <= r2) radius_search(q, mid + 1, hi, next_axis, r2, out);
  }

  std::vector<Vec3> points_;        // reordered to match ids_
  std::vector<Vec3> points_by_id_;  // original order
  std::vector<int> ids_;
};

}  // namespace splatjoint
