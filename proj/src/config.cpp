// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include "splatjoint/config.hpp"

#include <json.hpp>

#include "splatjoint/common.hpp"

namespace splatjoint {

using ordered_json = nlohmann::ordered_json;

namespace {

// Single field table so to_json / merge_json cannot drift apart.
template <typename Fn>
void for_each_field(EngineConfig& c, Fn&& fn) {
  fn("d_latent", c.d_latent);
  fn("d_feat", c.d_feat);
  fn("d_dense", c.d_dense);
  fn("sh_order", c.sh_order);
  fn("opacity_min", c.opacity_min);
  fn("depth_tol", c.depth_tol);
  fn("occlusion_max", c.occlusion_max);
  fn("edge_min", c.edge_min);
  fn("merge_min", c.merge_min);
  fn("top_k_masks", c.top_k_masks);
  fn("assoc_min", c.assoc_min);
  fn("query_threshold", c.query_threshold);
  fn("splat_k", c.splat_k);
  fn("splat_radius_px", c.splat_radius_px);
  fn("splat_sigma_px", c.splat_sigma_px);
  fn("splat_weight_eps", c.splat_weight_eps);
  fn("splat_coverage_min", c.splat_coverage_min);
  fn("decoder_hidden", c.decoder_hidden);
  fn("distill_lr", c.distill_lr);
  fn("distill_steps", c.distill_steps);
  fn("distill_pixels_per_step", c.distill_pixels_per_step);
  fn("corr_sharpness", c.corr_sharpness);
  fn("corr_samples_per_part", c.corr_samples_per_part);
  fn("corr_refresh_every", c.corr_refresh_every);
  fn("lambda_cons", c.lambda_cons);
  fn("lambda_match", c.lambda_match);
  fn("solve_lr", c.solve_lr);
  fn("solve_lr_decay", c.solve_lr_decay);
  fn("solve_global_lr_scale", c.solve_global_lr_scale);
  fn("solve_max_steps", c.solve_max_steps);
  fn("solve_rel_tol", c.solve_rel_tol);
  fn("solve_tol_window", c.solve_tol_window);
  fn("solve_pixels_per_step", c.solve_pixels_per_step);
  fn("use_match", c.use_match);
  fn("use_mask", c.use_mask);
  fn("use_rgb", c.use_rgb);
  fn("use_label", c.use_label);
  fn("theta_min_deg", c.theta_min_deg);
  fn("prismatic_min", c.prismatic_min);
  fn("motion_min", c.motion_min);
  fn("ransac_iters", c.ransac_iters);
  fn("ransac_inlier_tol", c.ransac_inlier_tol);
  fn("ransac_min_inlier_ratio", c.ransac_min_inlier_ratio);
  fn("icp_trim", c.icp_trim);
  fn("icp_iters", c.icp_iters);
  fn("dup_radius", c.dup_radius);
  fn("dup_opacity_tol", c.dup_opacity_tol);
  fn("oracle_image_size", c.oracle_image_size);
  fn("oracle_cameras", c.oracle_cameras);
  fn("oracle_orbit_radius", c.oracle_orbit_radius);
  fn("seed", c.seed);
  fn("threads", c.threads);
}

}  // namespace

std::string EngineConfig::to_json() const {
  ordered_json j;
  EngineConfig copy = *this;
  for_each_field(copy, [&](const char* name, auto& value) { j[name] = value; });
  return j.dump(2);
}

void EngineConfig::merge_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config parse failure: ") + e.what());
  }
  for_each_field(*this, [&](const char* name, auto& value) {
    if (j.contains(name)) value = j.at(name).get<std::decay_t<decltype(value)>>();
  });
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    EngineConfig probe = *this;
    for_each_field(probe, [&](const char* name, auto&) {
      if (it.key() == name) known = true;
    });
    if (!known) throw FormatError("unknown config key: " + it.key());
  }
}

EngineConfig EngineConfig::from_json(const std::string& text) {
  EngineConfig c;
  c.merge_json(text);
  return c;
}

}  // namespace splatjoint
