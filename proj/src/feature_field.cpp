// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include "splatjoint/feature_field.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace splatjoint {

// ---------------------------------------------------------------------------
// SplatRenderer

void SplatRenderer::prepare(const Camera& cam, const std::vector<Vec3>& positions,
                            const std::vector<double>& opacities,
                            const std::vector<float>* depth) {
  cam_ = cam;
  proj_.clear();
  depth_.clear();
  opacity_.clear();
  ids_.clear();
  positions_.clear();
  proj_.reserve(positions.size());
  for (int i = 0; i < static_cast<int>(positions.size()); ++i) {
    const auto p = try_project(cam, positions[i]);
    if (!p) continue;
    if (depth && !depth->empty()) {
      const int px = static_cast<int>(std::floor(p->pixel.x() + 0.5));
      const int py = static_cast<int>(std::floor(p->pixel.y() + 0.5));
      if (px >= 0 && py >= 0 && px < cam.width && py < cam.height) {
        const float d = (*depth)[static_cast<std::size_t>(py) * cam.width + px];
        if (std::isfinite(d) && p->depth > d + depth_gate_) continue;  // occluded
      }
    }
    proj_.push_back(p->pixel);
    depth_.push_back(p->depth);
    opacity_.push_back(opacities[i]);
    ids_.push_back(i);
    positions_.push_back(positions[i]);
  }
  cell_ = std::max(1.0, radius_);
  grid_w_ = static_cast<int>(std::ceil(cam.width / cell_)) + 2;
  grid_h_ = static_cast<int>(std::ceil(cam.height / cell_)) + 2;
  grid_.assign(static_cast<std::size_t>(grid_w_) * grid_h_, {});
  for (int e = 0; e < static_cast<int>(proj_.size()); ++e) {
    const int gx = static_cast<int>(std::floor(proj_[e].x() / cell_)) + 1;
    const int gy = static_cast<int>(std::floor(proj_[e].y() / cell_)) + 1;
    if (gx < 0 || gy < 0 || gx >= grid_w_ || gy >= grid_h_) continue;
    grid_[static_cast<std::size_t>(gy) * grid_w_ + gx].push_back(e);
  }
}

void SplatRenderer::gather(double qx, double qy, std::vector<int>& out) const {
  out.clear();
  const int gx = static_cast<int>(std::floor(qx / cell_)) + 1;
  const int gy = static_cast<int>(std::floor(qy / cell_)) + 1;
  const double r2 = radius_ * radius_;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      const int cx = gx + dx, cy = gy + dy;
      if (cx < 0 || cy < 0 || cx >= grid_w_ || cy >= grid_h_) continue;
      for (int e : grid_[static_cast<std::size_t>(cy) * grid_w_ + cx]) {
        const double dxp = proj_[e].x() - qx, dyp = proj_[e].y() - qy;
        if (dxp * dxp + dyp * dyp <= r2) out.push_back(e);
      }
    }
  if (static_cast<int>(out.size()) > k_) {
    std::partial_sort(out.begin(), out.begin() + k_, out.end(), [&](int a, int b) {
      const double da = (proj_[a] - Vec2(qx, qy)).squaredNorm();
      const double db = (proj_[b] - Vec2(qx, qy)).squaredNorm();
      if (da != db) return da < db;
      return ids_[a] < ids_[b];
    });
    out.resize(k_);
  }
  // Deterministic contribution order.
  std::sort(out.begin(), out.end(), [&](int a, int b) { return ids_[a] < ids_[b]; });
}

RenderedBuffers SplatRenderer::render(const SplatAttributes& attrs,
                                      const std::vector<PixelSample>& pixels,
                                      SplatContext* ctx) const {
  const Eigen::Index q = static_cast<Eigen::Index>(pixels.size());
  RenderedBuffers out;
  out.color.setZero(attrs.color.rows(), attrs.color.rows() ? q : 0);
  out.latent.setZero(attrs.latent.rows(), attrs.latent.rows() ? q : 0);
  out.logits.setZero(attrs.logits.rows(), attrs.logits.rows() ? q : 0);
  out.weight.setZero(q);
  out.empty.assign(pixels.size(), 1);
  if (ctx) ctx->contribs.assign(pixels.size(), {});

  std::vector<std::vector<SplatContext::Contrib>> local(pixels.size());
  parallel_for(pixels.size(), [&](std::size_t pi) {
    std::vector<int> near;
    const double qx = pixels[pi].x, qy = pixels[pi].y;
    gather(qx, qy, near);
    double wsum = 0.0;
    auto& contribs = local[pi];
    contribs.reserve(near.size());
    for (int e : near) {
      const Vec2 delta = proj_[e] - Vec2(qx, qy);
      const double w = opacity_[e] * std::exp(-delta.squaredNorm() / (2.0 * sigma_ * sigma_));
      contribs.push_back({e, w, delta});
      wsum += w;
    }
    out.weight[static_cast<Eigen::Index>(pi)] = wsum;
    if (wsum < eps_) {
      contribs.clear();
      return;
    }
    out.empty[pi] = 0;
    for (const auto& c : contribs) {
      const double wn = c.weight / wsum;
      const Eigen::Index g = ids_[c.gaussian];
      if (attrs.color.rows()) out.color.col(pi) += wn * attrs.color.col(g);
      if (attrs.latent.rows()) out.latent.col(pi) += wn * attrs.latent.col(g);
      if (attrs.logits.rows()) out.logits.col(pi) += wn * attrs.logits.col(g);
    }
  });
  if (ctx) ctx->contribs = std::move(local);
  return out;
}

void SplatRenderer::backward(const SplatContext& ctx, const SplatAttributes& attrs,
                             const RenderedBuffers& out, const std::vector<PixelSample>& pixels,
                             const Eigen::MatrixXd& dcolor, const Eigen::MatrixXd& dlatent,
                             const Eigen::MatrixXd& dlogits, SplatAttributes* grad_attrs,
                             std::vector<Vec3>* grad_positions,
                             const Eigen::VectorXd& dweight) const {
  (void)pixels;
  const double inv_sigma2 = 1.0 / (sigma_ * sigma_);
  for (std::size_t pi = 0; pi < ctx.contribs.size(); ++pi) {
    const auto& contribs = ctx.contribs[pi];
    if (contribs.empty()) continue;
    const double wsum = out.weight[static_cast<Eigen::Index>(pi)];
    for (const auto& c : contribs) {
      const Eigen::Index g = ids_[c.gaussian];
      const double wn = c.weight / wsum;
      // dL/dw accumulated over channels: (attr - out) / wsum dotted with dL/dout.
      double dL_dw = 0.0;
      if (dweight.size()) dL_dw += dweight[static_cast<Eigen::Index>(pi)];
      if (dcolor.cols()) {
        if (grad_attrs && grad_attrs->color.rows())
          grad_attrs->color.col(g) += wn * dcolor.col(pi);
        dL_dw += (attrs.color.col(g) - out.color.col(pi)).dot(dcolor.col(pi)) / wsum;
      }
      if (dlatent.cols()) {
        if (grad_attrs && grad_attrs->latent.rows())
          grad_attrs->latent.col(g) += wn * dlatent.col(pi);
        dL_dw += (attrs.latent.col(g) - out.latent.col(pi)).dot(dlatent.col(pi)) / wsum;
      }
      if (dlogits.cols()) {
        if (grad_attrs && grad_attrs->logits.rows())
          grad_attrs->logits.col(g) += wn * dlogits.col(pi);
        dL_dw += (attrs.logits.col(g) - out.logits.col(pi)).dot(dlogits.col(pi)) / wsum;
      }
      if (grad_positions && dL_dw != 0.0) {
        // dw/d(pixel position of the center) = -w * delta / sigma^2.
        const Vec2 du = dL_dw * c.weight * (-inv_sigma2) * c.delta;
        const auto jac = projection_jacobian(cam_, positions_[c.gaussian]);
        (*grad_positions)[g] += jac.transpose() * du;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Decoder

Decoder::Decoder(int d_latent, int hidden, int d_feat, int d_dense, RandomStream& rng) {
  const auto init = [&](Eigen::MatrixXd& w, int rows, int cols) {
    w.resize(rows, cols);
    const double s = std::sqrt(2.0 / (rows + cols));
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = s * rng.normal();
  };
  init(w1_, hidden, d_latent);
  init(w_inst_, d_feat, hidden);
  init(w_part_, d_feat, hidden);
  init(w_dense_, d_dense, hidden);
  b1_.setZero(hidden);
  b_inst_.setZero(d_feat);
  b_part_.setZero(d_feat);
  b_dense_.setZero(d_dense);
}

Decoder::Output Decoder::forward(const Eigen::MatrixXd& latents) const {
  Output out;
  out.hidden_act = ((w1_ * latents).colwise() + b1_).array().tanh().matrix();
  out.instance = (w_inst_ * out.hidden_act).colwise() + b_inst_;
  out.part = (w_part_ * out.hidden_act).colwise() + b_part_;
  out.dense = (w_dense_ * out.hidden_act).colwise() + b_dense_;
  return out;
}

Eigen::MatrixXd Decoder::backward(const Eigen::MatrixXd& latents, const Output& out,
                                  const Eigen::MatrixXd& dinstance, const Eigen::MatrixXd& dpart,
                                  const Eigen::MatrixXd& ddense,
                                  Eigen::VectorXd* param_grad) const {
  Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(out.hidden_act.rows(), out.hidden_act.cols());
  if (dinstance.size()) dh += w_inst_.transpose() * dinstance;
  if (dpart.size()) dh += w_part_.transpose() * dpart;
  if (ddense.size()) dh += w_dense_.transpose() * ddense;
  // tanh' = 1 - act^2
  const Eigen::MatrixXd dpre = dh.cwiseProduct(
      (1.0 - out.hidden_act.array().square()).matrix());
  if (param_grad) {
    Eigen::Index off = 0;
    const auto add_mat = [&](const Eigen::MatrixXd& g) {
      param_grad->segment(off, g.size()) += Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
      off += g.size();
    };
    const auto add_vec = [&](const Eigen::VectorXd& g) {
      param_grad->segment(off, g.size()) += g;
      off += g.size();
    };
    add_mat(dpre * latents.transpose());                       // w1
    add_vec(dpre.rowwise().sum());                             // b1
    add_mat(dinstance.size() ? Eigen::MatrixXd(dinstance * out.hidden_act.transpose())
                             : Eigen::MatrixXd::Zero(w_inst_.rows(), w_inst_.cols()));
    add_vec(dinstance.size() ? Eigen::VectorXd(dinstance.rowwise().sum())
                             : Eigen::VectorXd::Zero(b_inst_.size()));
    add_mat(dpart.size() ? Eigen::MatrixXd(dpart * out.hidden_act.transpose())
                         : Eigen::MatrixXd::Zero(w_part_.rows(), w_part_.cols()));
    add_vec(dpart.size() ? Eigen::VectorXd(dpart.rowwise().sum())
                         : Eigen::VectorXd::Zero(b_part_.size()));
    add_mat(ddense.size() ? Eigen::MatrixXd(ddense * out.hidden_act.transpose())
                          : Eigen::MatrixXd::Zero(w_dense_.rows(), w_dense_.cols()));
    add_vec(ddense.size() ? Eigen::VectorXd(ddense.rowwise().sum())
                          : Eigen::VectorXd::Zero(b_dense_.size()));
  }
  return w1_.transpose() * dpre;
}

Eigen::Index Decoder::param_count() const {
  return w1_.size() + b1_.size() + w_inst_.size() + b_inst_.size() + w_part_.size() +
         b_part_.size() + w_dense_.size() + b_dense_.size();
}

Eigen::VectorXd Decoder::params() const {
  Eigen::VectorXd p(param_count());
  Eigen::Index off = 0;
  const auto put_mat = [&](const Eigen::MatrixXd& m) {
    p.segment(off, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    off += m.size();
  };
  const auto put_vec = [&](const Eigen::VectorXd& v) {
    p.segment(off, v.size()) = v;
    off += v.size();
  };
  put_mat(w1_);
  put_vec(b1_);
  put_mat(w_inst_);
  put_vec(b_inst_);
  put_mat(w_part_);
  put_vec(b_part_);
  put_mat(w_dense_);
  put_vec(b_dense_);
  return p;
}

void Decoder::set_params(const Eigen::VectorXd& p) {
  Eigen::Index off = 0;
  const auto get_mat = [&](Eigen::MatrixXd& m) {
    m = Eigen::Map<const Eigen::MatrixXd>(p.data() + off, m.rows(), m.cols());
    off += m.size();
  };
  const auto get_vec = [&](Eigen::VectorXd& v) {
    v = p.segment(off, v.size());
    off += v.size();
  };
  get_mat(w1_);
  get_vec(b1_);
  get_mat(w_inst_);
  get_vec(b_inst_);
  get_mat(w_part_);
  get_vec(b_part_);
  get_mat(w_dense_);
  get_vec(b_dense_);
}

// ---------------------------------------------------------------------------
// Losses

double feat_loss(const RenderedBuffers& rendered, const Decoder& decoder,
                 const PixelTargets& targets, FeatLossGrads* grads) {
  const Eigen::Index q = rendered.latent.cols();
  const Decoder::Output out = decoder.forward(rendered.latent);
  double loss = 0.0;
  Eigen::MatrixXd dinst, dpart, ddense;
  if (grads) {
    dinst.setZero(out.instance.rows(), q);
    dpart.setZero(out.part.rows(), q);
    ddense.setZero(out.dense.rows(), q);
  }
  // covered = non-empty pixel with a target for the branch
  const auto branch = [&](const Eigen::MatrixXd& pred, const Eigen::MatrixXd& tgt,
                          const std::vector<std::uint8_t>& has, Eigen::MatrixXd* dpred) {
    Eigen::Index n = 0;
    for (Eigen::Index i = 0; i < q; ++i)
      if (has[i] && !rendered.empty[i]) ++n;
    if (n == 0) return;
    const double denom = static_cast<double>(n) * static_cast<double>(pred.rows());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < q; ++i) {
      if (!has[i] || rendered.empty[i]) continue;
      const Eigen::VectorXd diff = pred.col(i) - tgt.col(i);
      acc += diff.squaredNorm();
      if (dpred) dpred->col(i) = (2.0 / denom) * diff;
    }
    loss += acc / denom;
  };
  branch(out.instance, targets.instance, targets.has_instance, grads ? &dinst : nullptr);
  branch(out.part, targets.part, targets.has_part, grads ? &dpart : nullptr);
  branch(out.dense, targets.dense, targets.has_dense, grads ? &ddense : nullptr);
  if (grads) {
    grads->ddecoder.setZero(decoder.param_count());
    grads->dlatent = decoder.backward(rendered.latent, out, dinst, dpart, ddense,
                                      &grads->ddecoder);
  }
  return loss;
}

double label_loss(const RenderedBuffers& rendered, const PixelTargets& targets,
                  Eigen::MatrixXd* dlogits) {
  const Eigen::Index q = rendered.logits.cols();
  const Eigen::Index c = rendered.logits.rows();
  if (dlogits) dlogits->setZero(c, q);
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < q; ++i)
    if (targets.label[i] >= 0 && !rendered.empty[i]) ++n;
  if (n == 0) return 0.0;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < q; ++i) {
    const int y = targets.label[i];
    if (y < 0 || rendered.empty[i]) continue;
    const Eigen::VectorXd z = rendered.logits.col(i);
    const double zmax = z.maxCoeff();
    const Eigen::VectorXd ez = (z.array() - zmax).exp();
    const double zsum = ez.sum();
    loss += -(z[y] - zmax - std::log(zsum));
    if (dlogits) {
      Eigen::VectorXd p = ez / zsum;
      p[y] -= 1.0;
      dlogits->col(i) = p / static_cast<double>(n);
    }
  }
  return loss / static_cast<double>(n);
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr_scale) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++t_;
  m_ = beta1 * m_ + (1.0 - beta1) * grad;
  v_ = beta2 * v_ + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1, t_);
  const double bc2 = 1.0 - std::pow(beta2, t_);
  params -= (lr_scale * lr_ / bc1) *
            m_.cwiseQuotient(((v_ / bc2).cwiseSqrt().array() + eps).matrix());
}

// ---------------------------------------------------------------------------
// FeatureField

namespace {
Decoder make_decoder(const SceneState& state, const EngineConfig& cfg, std::uint64_t seed) {
  RandomStream rng(seed);
  return Decoder(state.d_latent, cfg.decoder_hidden, state.d_feat, state.d_dense, rng);
}
}  // namespace

FeatureField::FeatureField(const SceneState& state, const std::vector<Proposal3D>& proposals,
                           const EngineConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), seed_(seed), decoder_(make_decoder(state, cfg, seed ^ 0xdec0dedecafULL)) {
  for (const auto& p : proposals)
    if (p.level == MaskLevel::Part) class_proposals_.push_back(p.id);
  std::sort(class_proposals_.begin(), class_proposals_.end());
  for (int c = 0; c < static_cast<int>(class_proposals_.size()); ++c)
    class_by_proposal_[class_proposals_[c]] = c;

  const Eigen::Index p_count = static_cast<Eigen::Index>(state.gaussians.size());
  latents_.resize(state.d_latent, p_count);
  for (Eigen::Index g = 0; g < p_count; ++g) latents_.col(g) = state.gaussians[g].latent;
  RandomStream lrng(seed ^ 0x109175ULL);
  logits_.resize(n_classes(), p_count);
  for (Eigen::Index j = 0; j < logits_.cols(); ++j)
    for (Eigen::Index i = 0; i < logits_.rows(); ++i) logits_(i, j) = 0.01 * lrng.normal();

  build_lookup(state, proposals);
}

int FeatureField::class_of_proposal(int pid) const {
  const auto it = class_by_proposal_.find(pid);
  return it == class_by_proposal_.end() ? -1 : it->second;
}

std::vector<int> FeatureField::hard_classes() const {
  std::vector<int> out(latents_.cols(), -1);
  if (logits_.rows() == 0) return out;
  for (Eigen::Index g = 0; g < logits_.cols(); ++g) {
    Eigen::Index best;
    logits_.col(g).maxCoeff(&best);
    out[g] = static_cast<int>(best);
  }
  return out;
}

Eigen::MatrixXd FeatureField::dense_features(const std::vector<int>& gaussians) const {
  Eigen::MatrixXd sub(latents_.rows(), gaussians.size());
  for (std::size_t i = 0; i < gaussians.size(); ++i) sub.col(i) = latents_.col(gaussians[i]);
  return decoder_.forward(sub).dense;
}

void FeatureField::build_lookup(const SceneState& state,
                                const std::vector<Proposal3D>& proposals) {
  mask_class_.assign(state.masks.size(), -1);
  for (const auto& p : proposals) {
    if (p.level != MaskLevel::Part) continue;
    const int c = class_by_proposal_.at(p.id);
    for (int mi : p.mask_indices) mask_class_[mi] = c;
  }
  lookup_.resize(state.views.size());
  for (std::size_t vi = 0; vi < state.views.size(); ++vi) {
    const auto& cam = state.views[vi].camera;
    const std::size_t n = static_cast<std::size_t>(cam.width) * cam.height;
    auto& lk = lookup_[vi];
    lk.instance_mask.assign(n, -1);
    lk.part_mask.assign(n, -1);
    lk.dense_mask.assign(n, -1);
    lk.dense_col.assign(n, -1);
  }
  for (int mi = 0; mi < static_cast<int>(state.masks.size()); ++mi) {
    const Mask2D& m = state.masks[mi];
    auto& lk = lookup_[m.view_id];
    auto& slot = m.level == MaskLevel::Part ? lk.part_mask : lk.instance_mask;
    const auto px = m.set_pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
      if (slot[px[i]] < 0) slot[px[i]] = mi;
      if (m.pixel_features.size() && lk.dense_mask[px[i]] < 0) {
        lk.dense_mask[px[i]] = mi;
        lk.dense_col[px[i]] = static_cast<int>(i);
      }
    }
  }
  for (auto& lk : lookup_) {
    for (std::uint32_t idx = 0; idx < lk.instance_mask.size(); ++idx)
      if (lk.instance_mask[idx] >= 0 || lk.part_mask[idx] >= 0) lk.supervised.push_back(idx);
  }
}

PixelTargets FeatureField::targets_for(const SceneState& state, int view_id,
                                       const std::vector<PixelSample>& pixels) const {
  const auto& lk = lookup_[view_id];
  const int w = state.views[view_id].camera.width;
  const Eigen::Index q = static_cast<Eigen::Index>(pixels.size());
  PixelTargets t;
  t.instance.setZero(state.d_feat, q);
  t.part.setZero(state.d_feat, q);
  t.dense.setZero(state.d_dense, q);
  t.has_instance.assign(pixels.size(), 0);
  t.has_part.assign(pixels.size(), 0);
  t.has_dense.assign(pixels.size(), 0);
  t.label.assign(pixels.size(), -1);
  for (Eigen::Index i = 0; i < q; ++i) {
    const std::size_t idx = static_cast<std::size_t>(pixels[i].y) * w + pixels[i].x;
    if (const int mi = lk.instance_mask[idx]; mi >= 0) {
      t.instance.col(i) = state.masks[mi].feature.cast<double>();
      t.has_instance[i] = 1;
    }
    if (const int mi = lk.part_mask[idx]; mi >= 0) {
      t.part.col(i) = state.masks[mi].feature.cast<double>();
      t.has_part[i] = 1;
      t.label[i] = mask_class_[mi];
    }
    if (const int mi = lk.dense_mask[idx]; mi >= 0) {
      t.dense.col(i) = state.masks[mi].pixel_features.col(lk.dense_col[idx]).cast<double>();
      t.has_dense[i] = 1;
    }
  }
  return t;
}

DistillStats FeatureField::distill(SceneState& state, std::ostream* progress) {
  DistillStats stats;
  const Eigen::Index p_count = static_cast<Eigen::Index>(state.gaussians.size());
  const int C = n_classes();

  std::vector<Vec3> positions(p_count);
  std::vector<double> opacities(p_count);
  for (Eigen::Index g = 0; g < p_count; ++g) {
    positions[g] = state.gaussians[g].position;
    opacities[g] = state.gaussians[g].opacity;
  }
  std::vector<SplatRenderer> renderers(state.views.size(), SplatRenderer(cfg_));
  for (std::size_t vi = 0; vi < state.views.size(); ++vi)
    renderers[vi].prepare(state.views[vi].camera, positions, opacities,
                          &state.views[vi].depth);

  // Flat parameter vector: [latents, logits, decoder].
  const Eigen::Index n_lat = latents_.size();
  const Eigen::Index n_log = logits_.size();
  const Eigen::Index n_dec = decoder_.param_count();
  Eigen::VectorXd params(n_lat + n_log + n_dec);
  params.segment(0, n_lat) = Eigen::Map<const Eigen::VectorXd>(latents_.data(), n_lat);
  if (n_log)
    params.segment(n_lat, n_log) = Eigen::Map<const Eigen::VectorXd>(logits_.data(), n_log);
  params.segment(n_lat + n_log, n_dec) = decoder_.params();

  Adam adam(params.size(), cfg_.distill_lr);
  RandomStream rng(seed_);
  SplatAttributes attrs;

  for (int step = 0; step < cfg_.distill_steps; ++step) {
    latents_ = Eigen::Map<const Eigen::MatrixXd>(params.data(), latents_.rows(), latents_.cols());
    if (n_log)
      logits_ = Eigen::Map<const Eigen::MatrixXd>(params.data() + n_lat, logits_.rows(),
                                                  logits_.cols());
    decoder_.set_params(params.segment(n_lat + n_log, n_dec));

    const int vi = step % static_cast<int>(state.views.size());
    const auto& view = state.views[vi];
    // Stratified sampling over the view's supervised region: equally spaced
    // strata of the covered-pixel list with per-step jitter.
    std::vector<PixelSample> pixels;
    {
      const auto& covered = lookup_[vi].supervised;
      if (covered.empty()) continue;
      const int budget = std::min<int>(cfg_.distill_pixels_per_step,
                                       static_cast<int>(covered.size()));
      const double stride = static_cast<double>(covered.size()) / budget;
      pixels.reserve(budget);
      for (int k = 0; k < budget; ++k) {
        const auto pos = static_cast<std::size_t>(
            std::min<double>((k + rng.uniform()) * stride,
                             static_cast<double>(covered.size()) - 1.0));
        const std::uint32_t idx = covered[pos];
        pixels.push_back({static_cast<int>(idx % view.camera.width),
                          static_cast<int>(idx / view.camera.width)});
      }
    }

    attrs.latent = latents_;
    attrs.logits = logits_;
    attrs.color.resize(0, 0);

    SplatContext ctx;
    const RenderedBuffers rendered = renderers[vi].render(attrs, pixels, &ctx);
    const PixelTargets targets = targets_for(state, vi, pixels);

    FeatLossGrads fg;
    const double lf = feat_loss(rendered, decoder_, targets, &fg);
    Eigen::MatrixXd dlogits_px;
    const double ll = C > 0 ? label_loss(rendered, targets, &dlogits_px) : 0.0;

    SplatAttributes grad_attrs;
    grad_attrs.latent.setZero(latents_.rows(), latents_.cols());
    if (C > 0) grad_attrs.logits.setZero(logits_.rows(), logits_.cols());
    renderers[vi].backward(ctx, attrs, rendered, pixels, Eigen::MatrixXd(), fg.dlatent,
                           C > 0 ? dlogits_px : Eigen::MatrixXd(), &grad_attrs, nullptr);

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());
    grad.segment(0, n_lat) =
        Eigen::Map<const Eigen::VectorXd>(grad_attrs.latent.data(), n_lat);
    if (n_log)
      grad.segment(n_lat, n_log) =
          Eigen::Map<const Eigen::VectorXd>(grad_attrs.logits.data(), n_log);
    grad.segment(n_lat + n_log, n_dec) = fg.ddecoder;
    // Decay toward zero so the fit converges instead of oscillating at the
    // step-noise floor.
    adam.step(params, grad,
              std::pow(0.01, static_cast<double>(step) / cfg_.distill_steps));

    if (step % 25 == 0 || step + 1 == cfg_.distill_steps) {
      stats.feat_trace.push_back(lf);
      stats.label_trace.push_back(ll);
      if (progress)
        (*progress) << "{\"step\":" << step << ",\"feat\":" << lf << ",\"label\":" << ll
                    << "}\n";
    }
    stats.final_feat = lf;
    stats.final_label = ll;
  }

  latents_ = Eigen::Map<const Eigen::MatrixXd>(params.data(), latents_.rows(), latents_.cols());
  if (n_log)
    logits_ =
        Eigen::Map<const Eigen::MatrixXd>(params.data() + n_lat, logits_.rows(), logits_.cols());
  decoder_.set_params(params.segment(n_lat + n_log, n_dec));

  for (Eigen::Index g = 0; g < p_count; ++g) state.gaussians[g].latent = latents_.col(g);
  return stats;
}

}  // namespace splatjoint
