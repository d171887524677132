// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "splatjoint/association.hpp"
#include "splatjoint/config.hpp"
#include "splatjoint/feature_field.hpp"
#include "splatjoint/metrics.hpp"

namespace splatjoint {

// ---------------------------------------------------------------------------
// Point mapping (forward / inverse articulation composition)

/// Maps a state-t point into state t': static points by xi_g alone,
/// articulated points by xi_o after xi_g.
Vec3 map_point(const Vec3& p, bool is_static, const Sim3Transform& xi_g,
               const std::optional<SE3Transform>& xi_o = std::nullopt);

/// Exact inverse of map_point.
Vec3 map_point_inverse(const Vec3& p, bool is_static, const Sim3Transform& xi_g,
                       const std::optional<SE3Transform>& xi_o = std::nullopt);

// ---------------------------------------------------------------------------
// Global initialization

struct RegistrationInput {
  std::vector<Vec3> points;
  std::vector<double> opacities;  // empty = all reliable
  Eigen::MatrixXd features;       // d x n descriptors for tentative matching
};

/// Closed-form similarity alignment (least squares) between paired points.
Sim3Transform umeyama_sim3(const std::vector<Vec3>& src, const std::vector<Vec3>& dst);

/// Trimmed-ICP similarity refinement with adaptive residual trimming.
Sim3Transform trimmed_icp_sim3(const std::vector<Vec3>& pts_t, const std::vector<Vec3>& pts_t2,
                               Sim3Transform xf, const EngineConfig& cfg);

/// RANSAC over feature-nearest-neighbor tentative correspondences, hypotheses
/// solved in closed form, refined by trimmed ICP. Throws DegenerateGeometry
/// (< 3 usable or collinear points) and NoConsensus (inlier ratio below
/// cfg.ransac_min_inlier_ratio).
Sim3Transform init_global(const RegistrationInput& state_t, const RegistrationInput& state_t2,
                          double opacity_min, const EngineConfig& cfg, RandomStream& rng);

// ---------------------------------------------------------------------------
// 3D-2D correspondences

struct Correspondence {
  int point = 0;       // caller-scoped point index
  Vec2 pixel;          // s_{p->o}, soft-argmin pixel in the mask's view
};

/// Softmax weights beta over the mask's set pixels for one 3D descriptor:
/// beta_i = exp(-s * ||F_px(u_i) - f||) normalized over the mask.
Eigen::VectorXd correspondence_weights(const Eigen::VectorXd& point_feature, const Mask2D& mask,
                                       double sharpness);

/// Soft-argmin pixel per point; pairs whose pixel lands outside the mask are
/// filtered out. `max_pixels` (0 = all) subsamples the mask grid for speed.
/// `interior_margin` additionally requires a (2m+1)^2 neighborhood of the
/// pixel to stay inside the mask: boundary soft-argmins are biased toward
/// the mask interior. Throws EmptyMask when the mask has no set pixels or no
/// pixel features.
std::vector<Correspondence> correspond_3d_2d(const Eigen::MatrixXd& point_features,
                                             const Mask2D& mask, double sharpness,
                                             int max_pixels = 0, int interior_margin = 0);

// ---------------------------------------------------------------------------
// Joint extraction

/// Classifies the relative part motion: revolute when the rotation angle
/// reaches theta_min_deg (axis from the rotation log, pivot the least-norm
/// fixed point projected orthogonal to the axis), else prismatic when the
/// translation reaches prismatic_min. nullopt = no motion.
std::optional<JointParams> extract_joint(const SE3Transform& xi_o, double theta_min_deg = 1.0,
                                         double prismatic_min = 1e-6);

// ---------------------------------------------------------------------------
// Joint motion solve

struct PartPair {
  int proposal_t = -1, proposal_t2 = -1;       // proposal ids
  std::vector<int> gaussians_t, gaussians_t2;  // gaussian indices per state
  std::vector<int> masks_t2;                   // target-state mask indices of
                                               // the matched proposal
};

struct MotionProblem {
  const SceneState* state_t = nullptr;
  const SceneState* state_t2 = nullptr;
  const FeatureField* field_t = nullptr;
  const FeatureField* field_t2 = nullptr;
  std::vector<PartPair> parts;      // matched part-level pairs (candidates)
  std::vector<PartPair> statics;    // matched static structures (instance level)
  Sim3Transform xi_g_init;
  // Per-gaussian dense descriptors (d_dense x P). When set these drive the
  // nearest-neighbor matching; otherwise the decoded field features do.
  Eigen::MatrixXd dense_t, dense_t2;

  Eigen::MatrixXd dense_features_t(const std::vector<int>& ids) const;
  Eigen::MatrixXd dense_features_t2(const std::vector<int>& ids) const;
};

struct PartSolution {
  PartPair pair;
  SE3Transform xi_o;
  std::optional<JointParams> joint;  // nullopt = NoMotion (part is static)
  double final_match_loss = 0.0;
};

struct LossTracePoint {
  int step = 0;
  double total = 0.0, rgb = 0.0, mask = 0.0, label = 0.0, match = 0.0;
};

struct MotionSolution {
  Sim3Transform xi_g;
  std::vector<PartSolution> parts;
  std::vector<LossTracePoint> trace;
  int steps = 0;
  bool converged = false;
};

/// First-order joint refinement of xi_g (log-scale, rotation, translation)
/// and every part's xi_o (rotation, translation) on
/// L = lambda_cons (L_rgb + L_mask + L_label) + lambda_match L_match,
/// with tangent-space increments composed multiplicatively and
/// correspondences refreshed every cfg.corr_refresh_every steps.
/// Throws Diverged on non-finite loss and LossWeights violations as SpecError.
MotionSolution solve_motion(const MotionProblem& problem, const EngineConfig& cfg,
                            std::uint64_t seed);

// ---------------------------------------------------------------------------
// Op-faithful loss evaluations (also used by the solver's tests)

/// Everything fixed at a parameter snapshot that the losses need: pixel
/// samples, active correspondences, per-view color attributes (SH evaluated
/// toward each target view at the snapshot poses) and logits. Transformed
/// positions are recomputed per evaluation from the live parameters, so the
/// declared gradients are exact for the evaluated function.
class MotionLossContext;

struct MotionLossContextDeleter {
  void operator()(MotionLossContext*) const;
};
using MotionLossContextPtr = std::unique_ptr<MotionLossContext, MotionLossContextDeleter>;

MotionLossContextPtr make_loss_context(const MotionProblem& problem, const EngineConfig& cfg,
                                       const Sim3Transform& snap_xi_g,
                                       const std::vector<SE3Transform>& snap_parts,
                                       std::uint64_t seed, int corr_window = 0);

struct SolveEvaluation {
  double total = 0.0, rgb = 0.0, mask = 0.0, label = 0.0, match = 0.0;
  // Layout: [log-scale, rot_g(3), trans_g(3)] then per part [rot(3), trans(3)];
  // tangent-space gradients for left-multiplied increments.
  Eigen::VectorXd grad;
};

/// One deterministic evaluation of the solver's total loss (render terms on
/// target view `view_id`, matching term over all bound correspondences).
SolveEvaluation evaluate_motion_loss(const MotionLossContext& ctx, int view_id,
                                     const Sim3Transform& xi_g,
                                     const std::vector<SE3Transform>& xi_parts, bool want_grad);

/// Eq-style mask feature loss for one part at a candidate composed transform
/// (part gaussians mapped by xi before rendering into the target state's
/// views that hold masks of its matched proposal). Deterministic, full-mask.
double mask_feature_loss(const MotionProblem& problem, int part_index, const Sim3Transform& xi_g,
                         const SE3Transform& xi_o, const EngineConfig& cfg);

/// Mean squared pixel distance between projected mapped points and their
/// corresponded pixels. Throws NoCorrespondences when empty.
struct BoundCorrespondence {
  int part = -1;       // -1 = static (xi_g only)
  int gaussian = 0;    // state-t gaussian index
  int view = 0;        // target-state view
  Vec2 pixel;
};
double match_loss(const MotionProblem& problem, const std::vector<BoundCorrespondence>& corrs,
                  const Sim3Transform& xi_g, const std::vector<SE3Transform>& xi_parts);

}  // namespace splatjoint
