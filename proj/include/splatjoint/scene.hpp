// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "splatjoint/geometry.hpp"

namespace splatjoint {

inline constexpr int kNoLabel = -1;

/// One oriented anisotropic Gaussian of the explicit scene model.
struct GaussianPrimitive {
  Vec3 position = Vec3::Zero();
  Quat rotation{1.0, 0.0, 0.0, 0.0};
  Vec3 scale = Vec3::Ones();            // per-axis extent, m, > 0
  double opacity = 1.0;                 // [0, 1]
  Eigen::Matrix3Xd sh;                  // RGB rows x (order+1)^2 coefficients
  Eigen::VectorXd latent;               // d_latent distilled feature
  int label = kNoLabel;                 // proposal id, kNoLabel = unassigned

  int sh_order() const;
};

struct ImageRGB {
  int width = 0, height = 0;
  std::vector<Eigen::Vector3f> pixels;  // row-major

  Eigen::Vector3f& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  const Eigen::Vector3f& at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
};

struct View {
  Camera camera;
  ImageRGB image;
  std::vector<float> depth;  // row-major, m; empty when absent. NaN = no reading.

  bool has_depth() const { return !depth.empty(); }
};

enum class MaskLevel : int { Instance = 0, Part = 1 };

/// A 2D class-agnostic mask in one view, with its mask-level feature and
/// optional dense per-pixel features over the set pixels (scan order).
struct Mask2D {
  int view_id = 0;
  int mask_id = 0;
  MaskLevel level = MaskLevel::Instance;
  int width = 0, height = 0;
  std::vector<std::uint8_t> bitmap;   // row-major, 0/1
  Eigen::VectorXf feature;            // d_feat
  Eigen::MatrixXf pixel_features;     // d_dense x set-pixel count, or 0x0

  bool test(int x, int y) const {
    if (x < 0 || y < 0 || x >= width || y >= height) return false;
    return bitmap[static_cast<std::size_t>(y) * width + x] != 0;
  }
  /// Indices of set pixels in scan order (pixel_features columns align).
  std::vector<std::uint32_t> set_pixels() const;
  std::size_t pixel_count() const;
};

enum class StateTag : int { T = 0, TPrime = 1 };

/// One articulation state: Gaussians + posed views + masks.
struct SceneState {
  StateTag tag = StateTag::T;
  int d_latent = 16, d_feat = 64, d_dense = 32;
  std::vector<GaussianPrimitive> gaussians;
  std::vector<View> views;
  std::vector<Mask2D> masks;

  /// Structural consistency: mask/view references, dims, invariant ranges.
  /// Throws DimensionError / FormatError.
  void validate() const;
};

/// Indices of Gaussians supporting a mask: projected center inside the
/// bitmap, in front of the camera, opacity >= opacity_min, and within
/// depth_tol of the view's depth buffer where a depth reading exists.
std::vector<int> visible_gaussians(const SceneState& state, const Mask2D& mask,
                                   double opacity_min, double depth_tol = 0.02);

/// Support plus the depth-occlusion diagnostics used by the mask filter.
struct SupportInfo {
  std::vector<int> support;   // passed every test
  int depth_rejected = 0;     // failed only the depth test
  double occlusion_ratio() const {
    const int cand = static_cast<int>(support.size()) + depth_rejected;
    return cand == 0 ? 0.0 : static_cast<double>(depth_rejected) / cand;
  }
};

SupportInfo mask_support(const SceneState& state, const Mask2D& mask, double opacity_min,
                         double depth_tol);

}  // namespace splatjoint
