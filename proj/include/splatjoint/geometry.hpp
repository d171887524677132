// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#pragma once

#include <optional>

#include <Eigen/Geometry>

#include "splatjoint/common.hpp"

namespace splatjoint {

using Quat = Eigen::Quaterniond;

/// Normalizes and resolves the double cover: w >= 0, with a deterministic
/// tie-break at w == 0.
Quat canonicalized(const Quat& q);

Quat quat_from_axis_angle(const Vec3& axis, double angle_rad);

/// Rotation vector (axis * angle), angle in [0, pi]. Stable near identity.
Vec3 rotation_log(const Quat& q);

/// Angle of the relative rotation a * b^-1, in radians.
double geodesic_angle(const Quat& a, const Quat& b);

struct SE3Transform {
  Quat rotation{1.0, 0.0, 0.0, 0.0};
  Vec3 translation{0.0, 0.0, 0.0};

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  SE3Transform inverse() const;
  /// this ∘ other: apply `other` first.
  SE3Transform compose(const SE3Transform& other) const;

  static SE3Transform identity() { return {}; }
};

struct Sim3Transform {
  double scale = 1.0;
  Quat rotation{1.0, 0.0, 0.0, 0.0};
  Vec3 translation{0.0, 0.0, 0.0};

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
  Sim3Transform inverse() const;
  Sim3Transform compose(const Sim3Transform& other) const;

  static Sim3Transform identity() { return {}; }
  static Sim3Transform from_se3(const SE3Transform& t) {
    return {1.0, t.rotation, t.translation};
  }
};

inline Vec3 apply_sim3(const Sim3Transform& xf, const Vec3& p) { return xf.apply(p); }

/// Pinhole camera. Extrinsics map world coordinates into the camera frame
/// (+z looks forward).
struct Camera {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  SE3Transform world_to_camera;
  int width = 0, height = 0;

  Vec3 to_camera(const Vec3& p_world) const { return world_to_camera.apply(p_world); }
  Vec3 center() const { return world_to_camera.inverse().translation; }
};

struct ProjectedPoint {
  Vec2 pixel;
  double depth = 0.0;  // camera-frame z, meters
};

inline constexpr double kMinProjectionDepth = 1e-6;

/// Pinhole projection; throws BehindCamera when camera-frame z <= 1e-6.
Vec2 project(const Camera& cam, const Vec3& p_world);

/// Non-throwing variant; nullopt when the point is behind the camera.
std::optional<ProjectedPoint> try_project(const Camera& cam, const Vec3& p_world);

/// d(pixel)/d(world point), the 2x3 pinhole Jacobian. Point must be in front
/// of the camera.
Eigen::Matrix<double, 2, 3> projection_jacobian(const Camera& cam, const Vec3& p_world);

}  // namespace splatjoint
