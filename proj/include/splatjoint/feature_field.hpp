// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#pragma once

#include <iosfwd>
#include <map>
#include <vector>

#include "splatjoint/config.hpp"
#include "splatjoint/mask_graph.hpp"
#include "splatjoint/scene.hpp"

namespace splatjoint {

struct PixelSample {
  int x = 0, y = 0;
};

/// Per-gaussian attribute channels blended by the splat core. Columns are
/// gaussians; any matrix may be 0 x N to skip that channel.
struct SplatAttributes {
  Eigen::MatrixXd color;   // 3 x N
  Eigen::MatrixXd latent;  // d_latent x N
  Eigen::MatrixXd logits;  // C x N
};

/// Blended outputs at the sampled pixels. Channels not requested stay 0 x Q.
struct RenderedBuffers {
  Eigen::MatrixXd color;
  Eigen::MatrixXd latent;
  Eigen::MatrixXd logits;
  Eigen::VectorXd weight;           // sum of splat weights per pixel
  std::vector<std::uint8_t> empty;  // weight < eps; excluded from losses
};

/// Retained forward state for the backward pass.
struct SplatContext {
  struct Contrib {
    int gaussian;
    double weight;
    Vec2 delta;  // projected center minus pixel
  };
  std::vector<std::vector<Contrib>> contribs;  // per pixel
};

/// Normalized K-nearest splat blending: per pixel, the K nearest projected
/// centers within radius r contribute w = opacity * exp(-d^2 / (2 sigma^2));
/// outputs are weight-normalized sums. Differentiable w.r.t. attributes and
/// gaussian positions (through the projected centers).
class SplatRenderer {
 public:
  explicit SplatRenderer(const EngineConfig& cfg)
      : k_(cfg.splat_k),
        radius_(cfg.splat_radius_px),
        sigma_(cfg.splat_sigma_px),
        eps_(cfg.splat_weight_eps),
        depth_gate_(3.0 * cfg.depth_tol) {}

  /// Projects the splat geometry into `cam` and builds the pixel-space grid.
  /// Gaussians behind the camera are skipped. When the view carries a depth
  /// buffer, gaussians far behind the observed surface at their own pixel
  /// are dropped; depth-blind blending would leak occluded attributes into
  /// the front surface.
  void prepare(const Camera& cam, const std::vector<Vec3>& positions,
               const std::vector<double>& opacities,
               const std::vector<float>* depth = nullptr);

  RenderedBuffers render(const SplatAttributes& attrs, const std::vector<PixelSample>& pixels,
                         SplatContext* ctx = nullptr) const;

  /// Accumulates gradients for one rendered batch. Any of the output slots
  /// may be null. d* matrices must match the render() output shapes (zero
  /// columns to skip a channel). `dweight` (per pixel, optional) is the
  /// gradient w.r.t. the pixel's total splat weight.
  void backward(const SplatContext& ctx, const SplatAttributes& attrs,
                const RenderedBuffers& out, const std::vector<PixelSample>& pixels,
                const Eigen::MatrixXd& dcolor, const Eigen::MatrixXd& dlatent,
                const Eigen::MatrixXd& dlogits, SplatAttributes* grad_attrs,
                std::vector<Vec3>* grad_positions,
                const Eigen::VectorXd& dweight = Eigen::VectorXd()) const;

  const Camera& camera() const { return cam_; }

 private:
  int k_;
  double radius_, sigma_, eps_, depth_gate_;
  Camera cam_;
  std::vector<Vec2> proj_;          // projected centers (valid entries only)
  std::vector<double> depth_;
  std::vector<double> opacity_;
  std::vector<int> ids_;            // original gaussian index per valid entry
  std::vector<Vec3> positions_;     // world positions per valid entry
  double cell_ = 1.0;
  int grid_w_ = 0, grid_h_ = 0;
  std::vector<std::vector<int>> grid_;  // valid-entry indices per cell

  void gather(double qx, double qy, std::vector<int>& out) const;
};

/// Two-layer tanh MLP decoding the latent field into instance / part / dense
/// feature branches.
class Decoder {
 public:
  Decoder(int d_latent, int hidden, int d_feat, int d_dense, RandomStream& rng);

  struct Output {
    Eigen::MatrixXd instance, part, dense;  // dims x N
    Eigen::MatrixXd hidden_act;             // retained for backward
  };
  Output forward(const Eigen::MatrixXd& latents) const;

  /// Returns dL/dlatents; adds parameter gradients into `param_grad` when
  /// non-null (layout matches params()).
  Eigen::MatrixXd backward(const Eigen::MatrixXd& latents, const Output& out,
                           const Eigen::MatrixXd& dinstance, const Eigen::MatrixXd& dpart,
                           const Eigen::MatrixXd& ddense, Eigen::VectorXd* param_grad) const;

  Eigen::VectorXd params() const;
  void set_params(const Eigen::VectorXd& p);
  Eigen::Index param_count() const;

  int d_latent() const { return static_cast<int>(w1_.cols()); }
  int d_feat() const { return static_cast<int>(w_inst_.rows()); }
  int d_dense() const { return static_cast<int>(w_dense_.rows()); }

 private:
  Eigen::MatrixXd w1_, w_inst_, w_part_, w_dense_;
  Eigen::VectorXd b1_, b_inst_, b_part_, b_dense_;
};

/// Targets at sampled pixels. A branch applies only where its flag is set.
struct PixelTargets {
  Eigen::MatrixXd instance;  // d_feat x Q
  Eigen::MatrixXd part;      // d_feat x Q
  Eigen::MatrixXd dense;     // d_dense x Q
  std::vector<std::uint8_t> has_instance, has_part, has_dense;
  std::vector<int> label;    // class index, -1 = unsupervised
};

struct FeatLossGrads {
  Eigen::MatrixXd dlatent;     // d_latent x Q, gradient at the rendered pixels
  Eigen::VectorXd ddecoder;    // decoder parameter gradient
};

/// Mean squared error per branch (over covered, non-empty pixels and entries),
/// summed across the three branches.
double feat_loss(const RenderedBuffers& rendered, const Decoder& decoder,
                 const PixelTargets& targets, FeatLossGrads* grads = nullptr);

/// Mean softmax cross-entropy over labeled, non-empty pixels.
double label_loss(const RenderedBuffers& rendered, const PixelTargets& targets,
                  Eigen::MatrixXd* dlogits = nullptr);

/// Adam with bias correction; deterministic.
class Adam {
 public:
  Adam(Eigen::Index n, double lr) : lr_(lr), m_(Eigen::VectorXd::Zero(n)),
                                    v_(Eigen::VectorXd::Zero(n)) {}
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr_scale = 1.0);

 private:
  double lr_;
  int t_ = 0;
  Eigen::VectorXd m_, v_;
};

struct DistillStats {
  std::vector<double> feat_trace;   // per logged step
  std::vector<double> label_trace;
  double final_feat = 0.0, final_label = 0.0;
};

/// The distilled per-state field: latent features, label logits and the
/// decoder. Label classes are the part-level proposals (sorted by id).
class FeatureField {
 public:
  FeatureField(const SceneState& state, const std::vector<Proposal3D>& proposals,
               const EngineConfig& cfg, std::uint64_t seed);

  /// Optimizes latents, logits and decoder weights against the scene's mask
  /// features and cluster labels; writes trained latents back into
  /// state.gaussians[].latent. Progress (when given a stream) is JSON-lines.
  DistillStats distill(SceneState& state, std::ostream* progress = nullptr);

  const Decoder& decoder() const { return decoder_; }
  const Eigen::MatrixXd& latents() const { return latents_; }
  const Eigen::MatrixXd& logits() const { return logits_; }
  int n_classes() const { return static_cast<int>(class_proposals_.size()); }
  /// Proposal id for a class index and the reverse lookup (-1 when absent).
  int proposal_of_class(int c) const { return class_proposals_[c]; }
  int class_of_proposal(int pid) const;
  /// argmax label-field class per gaussian (-1 when n_classes == 0).
  std::vector<int> hard_classes() const;
  /// Dense-branch features for a set of gaussians (d_dense x n).
  Eigen::MatrixXd dense_features(const std::vector<int>& gaussians) const;

  /// Per-view pixel targets used by distillation; exposed for tests.
  PixelTargets targets_for(const SceneState& state, int view_id,
                           const std::vector<PixelSample>& pixels) const;

 private:
  EngineConfig cfg_;
  std::uint64_t seed_;
  Decoder decoder_;
  Eigen::MatrixXd latents_;  // d_latent x P
  Eigen::MatrixXd logits_;   // C x P
  std::vector<int> class_proposals_;           // class -> proposal id
  std::map<int, int> class_by_proposal_;       // proposal id -> class
  // Per view: pixel -> mask index (instance / part levels; -1 = none) and
  // column into that mask's pixel_features (-1 = none).
  struct ViewLookup {
    std::vector<int> instance_mask, part_mask, dense_mask, dense_col;
    std::vector<std::uint32_t> supervised;  // pixels covered by any mask
  };
  std::vector<ViewLookup> lookup_;

  void build_lookup(const SceneState& state, const std::vector<Proposal3D>& proposals);
  std::vector<int> mask_class_;  // per mask: label class (-1 if none)
};

}  // namespace splatjoint
