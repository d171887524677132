// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#pragma once

#include "splatjoint/oracle.hpp"
#include "splatjoint/sh.hpp"
#include "splatjoint/scene.hpp"

namespace splatjoint::testhelpers {

inline Camera look_down_z(int size = 64, double f = 100.0) {
  Camera cam;
  cam.fx = cam.fy = f;
  cam.cx = cam.cy = 0.5 * (size - 1);
  cam.width = cam.height = size;
  return cam;
}

inline GaussianPrimitive gaussian_at(const Vec3& p, double opacity = 1.0, int d_latent = 16,
                                     int sh_order = 0) {
  GaussianPrimitive g;
  g.position = p;
  g.opacity = opacity;
  g.scale = Vec3::Constant(0.01);
  g.sh = Eigen::Matrix3Xd::Zero(3, sh_coeff_count(sh_order));
  g.latent = Eigen::VectorXd::Zero(d_latent);
  return g;
}

/// A single-view scene whose mask covers a centered square.
inline SceneState single_view_scene(int size = 64, int half_mask = 10) {
  SceneState s;
  View v;
  v.camera = look_down_z(size);
  v.image.width = v.image.height = size;
  v.image.pixels.assign(static_cast<std::size_t>(size) * size, Eigen::Vector3f::Zero());
  s.views.push_back(std::move(v));
  Mask2D m;
  m.view_id = 0;
  m.mask_id = 0;
  m.level = MaskLevel::Part;
  m.width = m.height = size;
  m.bitmap.assign(static_cast<std::size_t>(size) * size, 0);
  const int c = size / 2;
  for (int y = c - half_mask; y <= c + half_mask; ++y)
    for (int x = c - half_mask; x <= c + half_mask; ++x)
      m.bitmap[static_cast<std::size_t>(y) * size + x] = 1;
  m.feature = Eigen::VectorXf::Zero(s.d_feat);
  m.feature[0] = 1.0f;
  s.masks.push_back(std::move(m));
  return s;
}

inline OracleSpec small_fridge(std::uint64_t seed = 3) {
  OracleSpec spec = oracle_preset("fridge", seed);
  for (auto& p : spec.parts) p.gaussian_count = std::max(40, p.gaussian_count / 5);
  spec.cameras = 20;
  spec.image_size = 160;
  return spec;
}

}  // namespace splatjoint::testhelpers
