// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#pragma once

#include <vector>

#include "splatjoint/config.hpp"
#include "splatjoint/metrics.hpp"
#include "splatjoint/scene.hpp"

namespace splatjoint {

/// Per-order linear action of a rotation on real SH coefficient vectors:
/// sample 2l+1 fixed well-conditioned unit directions u_j, stack their basis
/// evaluations into Q, and return SH(R u_j) stacked times Q^-1. The result is
/// orthogonal. Throws IllConditioned when no direction set conditions Q.
Eigen::MatrixXd sh_rotation_matrix(int order, const Quat& rotation);

/// Applies a similarity transform to whole primitives: positions via
/// apply_sim3, per-gaussian rotations left-multiplied, scales multiplied by
/// the scale factor, SH blocks rotated per order, opacity unchanged.
std::vector<GaussianPrimitive> transform_gaussians(const std::vector<GaussianPrimitive>& input,
                                                   const Sim3Transform& xf);

/// Mean camera-frame depth of each gaussian over the views that see it in
/// front of the camera. Gaussians seen by no view get +inf.
std::vector<double> mean_view_depth(const std::vector<GaussianPrimitive>& gaussians,
                                    const std::vector<View>& views);

/// Concatenates both sets, then drops duplicates: a cross-state pair within
/// dup_radius with the same label and opacities within dup_opacity_tol keeps
/// only the member whose own state observes it at smaller mean depth (ties
/// keep state t). A gaussian that already won a pair is never dropped later.
std::vector<GaussianPrimitive> merge_states(const std::vector<GaussianPrimitive>& g_t,
                                            const std::vector<double>& mean_depth_t,
                                            const std::vector<GaussianPrimitive>& g_t2,
                                            const std::vector<double>& mean_depth_t2,
                                            const EngineConfig& cfg);

/// Fraction alpha of the part motion along its joint: screw interpolation for
/// revolute joints, linear for prismatic ones.
SE3Transform interpolate_part_motion(const SE3Transform& xi_o, double alpha,
                                     double theta_min_deg = 1.0, double prismatic_min = 1e-6);

}  // namespace splatjoint
