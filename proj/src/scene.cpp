// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include "splatjoint/scene.hpp"

#include <cmath>

#include "splatjoint/sh.hpp"

namespace splatjoint {

int GaussianPrimitive::sh_order() const {
  return sh_order_from_count(static_cast<int>(sh.cols()));
}

std::vector<std::uint32_t> Mask2D::set_pixels() const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < bitmap.size(); ++i)
    if (bitmap[i]) out.push_back(i);
  return out;
}

std::size_t Mask2D::pixel_count() const {
  std::size_t n = 0;
  for (auto b : bitmap)
    if (b) ++n;
  return n;
}

void SceneState::validate() const {
  for (const auto& g : gaussians) {
    if (g.opacity < 0.0 || g.opacity > 1.0)
      throw FormatError("gaussian opacity outside [0,1]");
    if (!(g.scale.array() > 0.0).all()) throw FormatError("gaussian scale must be positive");
    if (g.latent.size() != d_latent)
      throw DimensionError("latent feature dim " + std::to_string(g.latent.size()) +
                           " != d_latent " + std::to_string(d_latent));
  }
  for (const auto& v : views) {
    const std::size_t n = static_cast<std::size_t>(v.camera.width) * v.camera.height;
    if (v.image.width != v.camera.width || v.image.height != v.camera.height ||
        v.image.pixels.size() != n)
      throw DimensionError("view image dims do not match camera");
    if (!v.depth.empty() && v.depth.size() != n)
      throw DimensionError("view depth dims do not match camera");
  }
  for (const auto& m : masks) {
    if (m.view_id < 0 || m.view_id >= static_cast<int>(views.size()))
      throw FormatError("mask references missing view " + std::to_string(m.view_id));
    const auto& v = views[m.view_id];
    if (m.width != v.camera.width || m.height != v.camera.height ||
        m.bitmap.size() != static_cast<std::size_t>(m.width) * m.height)
      throw DimensionError("mask bitmap dims do not match its view");
    if (m.feature.size() != d_feat)
      throw DimensionError("mask feature dim " + std::to_string(m.feature.size()) +
                           " != d_feat " + std::to_string(d_feat));
    if (m.pixel_features.size() != 0) {
      if (m.pixel_features.rows() != d_dense)
        throw DimensionError("mask pixel feature dim != d_dense");
      if (m.pixel_features.cols() != static_cast<Eigen::Index>(m.pixel_count()))
        throw DimensionError("mask pixel feature count != set pixel count");
    }
  }
}

SupportInfo mask_support(const SceneState& state, const Mask2D& mask, double opacity_min,
                         double depth_tol) {
  SupportInfo info;
  const View& view = state.views[mask.view_id];
  for (int gi = 0; gi < static_cast<int>(state.gaussians.size()); ++gi) {
    const auto& g = state.gaussians[gi];
    if (g.opacity < opacity_min) continue;
    const auto proj = try_project(view.camera, g.position);
    if (!proj) continue;
    // Pixel centers sit at integer coordinates; (px, py) covers +-0.5.
    const int px = static_cast<int>(std::floor(proj->pixel.x() + 0.5));
    const int py = static_cast<int>(std::floor(proj->pixel.y() + 0.5));
    if (!mask.test(px, py)) continue;
    if (view.has_depth()) {
      const float d = view.depth[static_cast<std::size_t>(py) * mask.width + px];
      if (std::isfinite(d) && std::abs(proj->depth - d) > depth_tol) {
        ++info.depth_rejected;
        continue;
      }
    }
    info.support.push_back(gi);
  }
  return info;
}

std::vector<int> visible_gaussians(const SceneState& state, const Mask2D& mask,
                                   double opacity_min, double depth_tol) {
  return mask_support(state, mask, opacity_min, depth_tol).support;
}

}  // namespace splatjoint
