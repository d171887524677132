// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#pragma once

#include <optional>
#include <vector>

#include "splatjoint/geometry.hpp"

namespace splatjoint {

enum class JointKind : int { Revolute = 0, Prismatic = 1 };

/// Articulation of one movable part. Axis is a unit direction; pivot is the
/// point of the axis line closest to the origin (revolute only). Magnitude is
/// radians for revolute joints and meters for prismatic ones.
struct JointParams {
  JointKind kind = JointKind::Revolute;
  Vec3 axis = Vec3::UnitZ();
  Vec3 pivot = Vec3::Zero();
  double magnitude = 0.0;
};

/// Angle between undirected joint axes, degrees, always in [0, 90].
double axis_angle_error(const JointParams& pred, const JointParams& gt);

/// True when the predicted joint kind matches; reported alongside the angular
/// error, never fatal.
inline bool joint_kind_matches(const JointParams& pred, const JointParams& gt) {
  return pred.kind == gt.kind;
}

/// Shortest distance between the two (infinite) joint axis lines, in units of
/// 0.1 m. Throws NotRevolute unless both joints are revolute.
double axis_pos_error(const JointParams& pred, const JointParams& gt);

/// Geodesic rotation error in degrees (revolute) or translation error in
/// meters (prismatic).
double part_motion_error(const SE3Transform& pred, const SE3Transform& gt, JointKind kind);

/// Symmetric Chamfer-L1: half the sum of the two directed mean
/// nearest-neighbor distances. Exact; throws EmptySet on empty input.
double chamfer_l1(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

}  // namespace splatjoint
