// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include "splatjoint/fusion.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "splatjoint/kdtree.hpp"
#include "splatjoint/motion.hpp"
#include "splatjoint/sh.hpp"

namespace splatjoint {

namespace {

// Deterministic per-(order, attempt) unit directions; the caller checks the
// conditioning of the resulting basis matrix and resamples on failure.
std::vector<Vec3> sample_directions(int n, int order, int attempt) {
  RandomStream rng(0x5d1ec7105ULL ^ (static_cast<std::uint64_t>(order) << 8) ^
                   static_cast<std::uint64_t>(attempt));
  std::vector<Vec3> dirs(n);
  for (int i = 0; i < n; ++i) dirs[i] = rng.unit_vector();
  return dirs;
}

}  // namespace

Eigen::MatrixXd sh_rotation_matrix(int order, const Quat& rotation) {
  const int n = 2 * order + 1;
  if (order == 0) return Eigen::MatrixXd::Ones(1, 1);
  const Eigen::Matrix3d rot = rotation.toRotationMatrix();
  for (int attempt = 0; attempt < 16; ++attempt) {
    const auto dirs = sample_directions(n, order, attempt);
    Eigen::MatrixXd q(n, n);
    for (int j = 0; j < n; ++j) q.col(j) = sh_basis(order, dirs[j]);
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(q);
    if (!lu.isInvertible()) continue;
    const Eigen::MatrixXd q_inv = lu.inverse();
    const double cond = q.norm() * q_inv.norm();  // Frobenius bound on cond(Q)
    if (cond > 1e6) continue;
    Eigen::MatrixXd rotated(n, n);
    for (int j = 0; j < n; ++j) rotated.col(j) = sh_basis(order, (rot * dirs[j]).normalized());
    return rotated * q_inv;
  }
  throw IllConditioned("no well-conditioned direction set for SH order " +
                       std::to_string(order));
}

std::vector<GaussianPrimitive> transform_gaussians(const std::vector<GaussianPrimitive>& input,
                                                   const Sim3Transform& xf) {
  int max_order = 0;
  for (const auto& g : input) max_order = std::max(max_order, g.sh_order());
  std::vector<Eigen::MatrixXd> rot_per_order(max_order + 1);
  for (int l = 0; l <= max_order; ++l) rot_per_order[l] = sh_rotation_matrix(l, xf.rotation);

  std::vector<GaussianPrimitive> out(input.size());
  parallel_for(input.size(), [&](std::size_t i) {
    const GaussianPrimitive& g = input[i];
    GaussianPrimitive& o = out[i];
    o = g;
    o.position = xf.apply(g.position);
    o.rotation = canonicalized(xf.rotation * g.rotation);
    o.scale = xf.scale * g.scale;
    int offset = 0;
    for (int l = 0; l <= g.sh_order(); ++l) {
      const int w = 2 * l + 1;
      o.sh.middleCols(offset, w) = g.sh.middleCols(offset, w) * rot_per_order[l].transpose();
      offset += w;
    }
  });
  return out;
}

std::vector<double> mean_view_depth(const std::vector<GaussianPrimitive>& gaussians,
                                    const std::vector<View>& views) {
  std::vector<double> out(gaussians.size(), std::numeric_limits<double>::infinity());
  parallel_for(gaussians.size(), [&](std::size_t i) {
    double sum = 0.0;
    int n = 0;
    for (const auto& v : views) {
      const Vec3 pc = v.camera.to_camera(gaussians[i].position);
      if (pc.z() > kMinProjectionDepth) {
        sum += pc.z();
        ++n;
      }
    }
    if (n > 0) out[i] = sum / n;
  });
  return out;
}

std::vector<GaussianPrimitive> merge_states(const std::vector<GaussianPrimitive>& g_t,
                                            const std::vector<double>& mean_depth_t,
                                            const std::vector<GaussianPrimitive>& g_t2,
                                            const std::vector<double>& mean_depth_t2,
                                            const EngineConfig& cfg) {
  std::vector<Vec3> pts_t(g_t.size());
  for (std::size_t i = 0; i < g_t.size(); ++i) pts_t[i] = g_t[i].position;
  const KdTree3 tree(pts_t);

  std::vector<std::uint8_t> drop_t(g_t.size(), 0), drop_t2(g_t2.size(), 0);
  std::vector<std::uint8_t> pin_t(g_t.size(), 0), pin_t2(g_t2.size(), 0);

  for (std::size_t j = 0; j < g_t2.size(); ++j) {
    if (tree.size() == 0) break;
    for (int i : tree.radius(g_t2[j].position, cfg.dup_radius)) {
      if (drop_t[i] || drop_t2[j]) continue;
      if (g_t[i].label != g_t2[j].label) continue;
      if (std::abs(g_t[i].opacity - g_t2[j].opacity) > cfg.dup_opacity_tol) continue;
      // Keep the copy its own cameras observe closer; state t wins ties.
      const bool keep_t = mean_depth_t[i] <= mean_depth_t2[j];
      if (keep_t) {
        pin_t[i] = 1;
        if (!pin_t2[j]) drop_t2[j] = 1;
      } else {
        pin_t2[j] = 1;
        if (!pin_t[i]) drop_t[i] = 1;
      }
    }
  }

  std::vector<GaussianPrimitive> fused;
  fused.reserve(g_t.size() + g_t2.size());
  for (std::size_t i = 0; i < g_t.size(); ++i)
    if (!drop_t[i]) fused.push_back(g_t[i]);
  for (std::size_t j = 0; j < g_t2.size(); ++j)
    if (!drop_t2[j]) fused.push_back(g_t2[j]);
  return fused;
}

SE3Transform interpolate_part_motion(const SE3Transform& xi_o, double alpha,
                                     double theta_min_deg, double prismatic_min) {
  const auto joint = extract_joint(xi_o, theta_min_deg, prismatic_min);
  if (!joint) return SE3Transform::identity();
  if (joint->kind == JointKind::Prismatic)
    return {Quat::Identity(), alpha * xi_o.translation};
  // Screw motion about the extracted axis: partial angle, same pivot, scaled
  // translation along the axis.
  const double along = xi_o.translation.dot(joint->axis);
  const Quat r = quat_from_axis_angle(joint->axis, alpha * joint->magnitude);
  const Vec3 t = joint->pivot - r * joint->pivot + alpha * along * joint->axis;
  return {r, t};
}

}  // namespace splatjoint
