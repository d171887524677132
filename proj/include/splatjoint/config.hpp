// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#pragma once

#include <cstdint>
#include <string>

namespace splatjoint {

/// Every tunable in one place. Field defaults are the engine defaults; the
/// CLI layers file and flag overrides on top (flag > file > default).
struct EngineConfig {
  // Scene / feature dimensions.
  int d_latent = 16;
  int d_feat = 64;
  int d_dense = 32;
  int sh_order = 3;

  // Visibility.
  double opacity_min = 0.7;
  double depth_tol = 0.02;       // m
  double occlusion_max = 0.8;    // drop a mask when this fraction of its
                                 // candidate support fails the depth test

  // Mask graph clustering.
  double edge_min = 0.3;
  double merge_min = 0.5;

  // Cross-state association.
  int top_k_masks = 5;
  double assoc_min = 0.5;

  // Affordance retrieval.
  double query_threshold = 0.6;

  // Splat renderer.
  int splat_k = 8;
  double splat_radius_px = 4.0;
  double splat_sigma_px = 1.5;
  double splat_weight_eps = 1e-8;
  double splat_coverage_min = 0.05;  // mask-loss soft coverage floor

  // Feature distillation.
  int decoder_hidden = 64;
  double distill_lr = 1e-2;
  int distill_steps = 2000;
  int distill_pixels_per_step = 2048;

  // 3D-2D correspondences.
  double corr_sharpness = 10.0;
  int corr_samples_per_part = 256;
  int corr_refresh_every = 50;

  // Motion solve.
  double lambda_cons = 1.0;
  double lambda_match = 1.0;
  double solve_lr = 5e-3;
  double solve_lr_decay = 0.9;     // per correspondence-refresh interval
  double solve_global_lr_scale = 0.25;
  int solve_max_steps = 2000;
  double solve_rel_tol = 1e-6;
  int solve_tol_window = 20;
  int solve_pixels_per_step = 1024;
  bool use_match = true;
  bool use_mask = true;
  bool use_rgb = true;
  bool use_label = true;

  // Joint classification.
  double theta_min_deg = 1.0;
  double prismatic_min = 1e-6;  // m
  double motion_min = 0.02;     // m; smaller max part displacement = static

  // Global registration.
  int ransac_iters = 512;
  double ransac_inlier_tol = 0.02;    // m
  double ransac_min_inlier_ratio = 0.2;
  double icp_trim = 0.8;
  int icp_iters = 30;

  // Fusion.
  double dup_radius = 0.005;   // m
  double dup_opacity_tol = 0.1;

  // Oracle generation.
  int oracle_image_size = 192;
  int oracle_cameras = 20;
  double oracle_orbit_radius = 1.8;  // m

  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency

  std::string to_json() const;
  static EngineConfig from_json(const std::string& text);
  /// Applies the keys present in `text` on top of *this.
  void merge_json(const std::string& text);
};

}  // namespace splatjoint
