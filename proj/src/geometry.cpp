// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include "splatjoint/geometry.hpp"

#include <cmath>

namespace splatjoint {

Quat canonicalized(const Quat& q) {
  Quat out = q.normalized();
  const double w = out.w();
  bool flip = w < 0.0;
  if (w == 0.0) {
    // Deterministic tie-break on the double cover.
    if (out.x() != 0.0)
      flip = out.x() < 0.0;
    else if (out.y() != 0.0)
      flip = out.y() < 0.0;
    else
      flip = out.z() < 0.0;
  }
  if (flip) out.coeffs() = -out.coeffs();
  return out;
}

Quat quat_from_axis_angle(const Vec3& axis, double angle_rad) {
  const double n = axis.norm();
  if (n < 1e-15) return Quat::Identity();
  return canonicalized(Quat(Eigen::AngleAxisd(angle_rad, axis / n)));
}

Vec3 rotation_log(const Quat& q_in) {
  const Quat q = canonicalized(q_in);
  const Vec3 v(q.x(), q.y(), q.z());
  const double vn = v.norm();
  if (vn < 1e-15) return Vec3::Zero();
  const double angle = 2.0 * std::atan2(vn, q.w());
  return v * (angle / vn);
}

double geodesic_angle(const Quat& a, const Quat& b) {
  // atan2 form stays accurate near identity, where acos loses digits.
  const Quat rel = a.conjugate() * b;
  const double vn = Vec3(rel.x(), rel.y(), rel.z()).norm();
  return 2.0 * std::atan2(vn, std::abs(rel.w()));
}

SE3Transform SE3Transform::inverse() const {
  const Quat rinv = rotation.conjugate();
  return {canonicalized(rinv), rinv * (-translation)};
}

SE3Transform SE3Transform::compose(const SE3Transform& other) const {
  return {canonicalized(rotation * other.rotation), rotation * other.translation + translation};
}

Sim3Transform Sim3Transform::inverse() const {
  const Quat rinv = rotation.conjugate();
  return {1.0 / scale, canonicalized(rinv), rinv * (translation * (-1.0 / scale))};
}

Sim3Transform Sim3Transform::compose(const Sim3Transform& other) const {
  return {scale * other.scale, canonicalized(rotation * other.rotation),
          scale * (rotation * other.translation) + translation};
}

Vec2 project(const Camera& cam, const Vec3& p_world) {
  const Vec3 pc = cam.to_camera(p_world);
  if (pc.z() <= kMinProjectionDepth)
    throw BehindCamera("camera-frame z = " + std::to_string(pc.z()));
  return {cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy};
}

std::optional<ProjectedPoint> try_project(const Camera& cam, const Vec3& p_world) {
  const Vec3 pc = cam.to_camera(p_world);
  if (pc.z() <= kMinProjectionDepth) return std::nullopt;
  return ProjectedPoint{{cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy},
                        pc.z()};
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const Camera& cam, const Vec3& p_world) {
  const Vec3 pc = cam.to_camera(p_world);
  const double z = pc.z();
  Eigen::Matrix<double, 2, 3> d_px_d_cam;
  d_px_d_cam << cam.fx / z, 0.0, -cam.fx * pc.x() / (z * z),
                0.0, cam.fy / z, -cam.fy * pc.y() / (z * z);
  return d_px_d_cam * cam.world_to_camera.rotation.toRotationMatrix();
}

}  // namespace splatjoint
