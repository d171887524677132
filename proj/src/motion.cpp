// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include "splatjoint/motion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "splatjoint/kdtree.hpp"
#include "splatjoint/sh.hpp"

namespace splatjoint {

// ---------------------------------------------------------------------------
// Point mapping

Vec3 map_point(const Vec3& p, bool is_static, const Sim3Transform& xi_g,
               const std::optional<SE3Transform>& xi_o) {
  const Vec3 m = xi_g.apply(p);
  if (is_static) return m;
  if (!xi_o) throw SpecError("articulated point mapped without a part transform");
  return xi_o->apply(m);
}

Vec3 map_point_inverse(const Vec3& p, bool is_static, const Sim3Transform& xi_g,
                       const std::optional<SE3Transform>& xi_o) {
  Vec3 m = p;
  if (!is_static) {
    if (!xi_o) throw SpecError("articulated point mapped without a part transform");
    m = xi_o->inverse().apply(m);
  }
  return xi_g.inverse().apply(m);
}

// ---------------------------------------------------------------------------
// Closed-form similarity alignment

Sim3Transform umeyama_sim3(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  if (src.size() != dst.size() || src.size() < 3)
    throw DegenerateGeometry("similarity alignment needs >= 3 paired points");
  Eigen::Matrix3Xd s(3, src.size()), d(3, dst.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    s.col(static_cast<Eigen::Index>(i)) = src[i];
    d.col(static_cast<Eigen::Index>(i)) = dst[i];
  }
  const Eigen::Matrix4d t = Eigen::umeyama(s, d, true);
  const Eigen::Matrix3d lin = t.topLeftCorner<3, 3>();
  const double scale = std::cbrt(std::max(1e-300, lin.determinant()));
  Sim3Transform out;
  out.scale = scale;
  out.rotation = canonicalized(Quat(Eigen::Matrix3d(lin / scale)));
  out.translation = t.topRightCorner<3, 1>();
  return out;
}

namespace {

SE3Transform umeyama_se3(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  Eigen::Matrix3Xd s(3, src.size()), d(3, dst.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    s.col(static_cast<Eigen::Index>(i)) = src[i];
    d.col(static_cast<Eigen::Index>(i)) = dst[i];
  }
  const Eigen::Matrix4d t = Eigen::umeyama(s, d, false);
  SE3Transform out;
  out.rotation = canonicalized(Quat(Eigen::Matrix3d(t.topLeftCorner<3, 3>())));
  out.translation = t.topRightCorner<3, 1>();
  return out;
}

void check_not_collinear(const std::vector<Vec3>& pts) {
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const double largest = eig.eigenvalues()[2];
  if (largest < 1e-18 || eig.eigenvalues()[1] < 1e-10 * largest)
    throw DegenerateGeometry("registration points are collinear or coincident");
}

std::vector<int> reliable_indices(const RegistrationInput& in, double opacity_min) {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(in.points.size()); ++i)
    if (in.opacities.empty() || in.opacities[i] >= opacity_min) idx.push_back(i);
  return idx;
}

}  // namespace

Sim3Transform init_global(const RegistrationInput& state_t, const RegistrationInput& state_t2,
                          double opacity_min, const EngineConfig& cfg, RandomStream& rng) {
  const std::vector<int> idx_t = reliable_indices(state_t, opacity_min);
  const std::vector<int> idx_t2 = reliable_indices(state_t2, opacity_min);
  if (idx_t.size() < 3 || idx_t2.size() < 3)
    throw DegenerateGeometry("fewer than 3 reliable points after opacity filtering");
  std::vector<Vec3> pts_t(idx_t.size()), pts_t2(idx_t2.size());
  for (std::size_t i = 0; i < idx_t.size(); ++i) pts_t[i] = state_t.points[idx_t[i]];
  for (std::size_t i = 0; i < idx_t2.size(); ++i) pts_t2[i] = state_t2.points[idx_t2[i]];
  check_not_collinear(pts_t);
  check_not_collinear(pts_t2);

  // Tentative correspondences: feature nearest neighbors for a subsample.
  const int n_sub = std::min<int>(512, static_cast<int>(idx_t.size()));
  std::vector<int> sub(idx_t.size());
  std::iota(sub.begin(), sub.end(), 0);
  for (int i = static_cast<int>(sub.size()) - 1; i > 0; --i)
    std::swap(sub[i], sub[rng.uniform_int(static_cast<std::uint64_t>(i) + 1)]);
  sub.resize(n_sub);
  std::sort(sub.begin(), sub.end());

  std::vector<std::pair<Vec3, Vec3>> tentative(n_sub);
  const bool have_feats = state_t.features.cols() > 0 && state_t2.features.cols() > 0;
  parallel_for(static_cast<std::size_t>(n_sub), [&](std::size_t si) {
    const int i = idx_t[sub[si]];
    int best_j = idx_t2[0];
    double best = std::numeric_limits<double>::infinity();
    for (int j : idx_t2) {
      const double d = have_feats
                           ? (state_t.features.col(i) - state_t2.features.col(j)).squaredNorm()
                           : (state_t.points[i] - state_t2.points[j]).squaredNorm();
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    tentative[si] = {state_t.points[i], state_t2.points[best_j]};
  });

  // RANSAC over 3-point hypotheses.
  int best_inliers = -1;
  Sim3Transform best_xf;
  const double tol2 = cfg.ransac_inlier_tol * cfg.ransac_inlier_tol;
  for (int it = 0; it < cfg.ransac_iters; ++it) {
    int a = static_cast<int>(rng.uniform_int(n_sub));
    int b = static_cast<int>(rng.uniform_int(n_sub));
    int c = static_cast<int>(rng.uniform_int(n_sub));
    if (a == b || b == c || a == c) continue;
    Sim3Transform hyp;
    try {
      hyp = umeyama_sim3({tentative[a].first, tentative[b].first, tentative[c].first},
                         {tentative[a].second, tentative[b].second, tentative[c].second});
    } catch (const Error&) {
      continue;
    }
    if (!std::isfinite(hyp.scale) || hyp.scale <= 0.0) continue;
    int inliers = 0;
    for (const auto& [p, q] : tentative)
      if ((hyp.apply(p) - q).squaredNorm() <= tol2) ++inliers;
    if (inliers > best_inliers) {
      best_inliers = inliers;
      best_xf = hyp;
    }
  }
  if (best_inliers < 0 ||
      static_cast<double>(best_inliers) / n_sub < cfg.ransac_min_inlier_ratio)
    throw NoConsensus("best inlier ratio " +
                      std::to_string(best_inliers < 0 ? 0.0 : double(best_inliers) / n_sub) +
                      " below threshold");

  // Re-fit on the consensus set.
  {
    std::vector<Vec3> src, dst;
    for (const auto& [p, q] : tentative)
      if ((best_xf.apply(p) - q).squaredNorm() <= tol2) {
        src.push_back(p);
        dst.push_back(q);
      }
    if (src.size() >= 3) best_xf = umeyama_sim3(src, dst);
  }

  // Trimmed ICP refinement over the full reliable sets.
  return trimmed_icp_sim3(pts_t, pts_t2, best_xf, cfg);
}

Sim3Transform trimmed_icp_sim3(const std::vector<Vec3>& pts_t, const std::vector<Vec3>& pts_t2,
                               Sim3Transform xf, const EngineConfig& cfg) {
  if (pts_t.size() < 3 || pts_t2.size() < 3) return xf;
  const KdTree3 tree_t2(pts_t2);
  for (int it = 0; it < cfg.icp_iters; ++it) {
    struct Pair {
      double d2;
      int i, j;
    };
    std::vector<Pair> pairs(pts_t.size());
    parallel_for(pts_t.size(), [&](std::size_t i) {
      const Vec3 mapped = xf.apply(pts_t[i]);
      const auto hit = tree_t2.nearest(mapped);
      pairs[i] = {hit.dist2, static_cast<int>(i), hit.index};
    });
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      if (a.d2 != b.d2) return a.d2 < b.d2;
      return a.i < b.i;
    });
    // Adaptive trim: always keep at least icp_trim of the pairs, and keep
    // everything within a few medians. A fixed-fraction cut would reward
    // shrinking the scale to tighten the residuals it keeps.
    const double median = std::sqrt(pairs[pairs.size() / 2].d2);
    const double thr2 = std::pow(std::max(3.0 * median, 1e-4), 2);
    std::size_t keep = std::max<std::size_t>(3, static_cast<std::size_t>(
        cfg.icp_trim * static_cast<double>(pairs.size())));
    while (keep < pairs.size() && pairs[keep].d2 <= thr2) ++keep;
    std::vector<Vec3> src(keep), dst(keep);
    for (std::size_t k = 0; k < keep; ++k) {
      src[k] = pts_t[pairs[k].i];
      dst[k] = pts_t2[pairs[k].j];
    }
    Sim3Transform next;
    try {
      next = umeyama_sim3(src, dst);
    } catch (const Error&) {
      break;
    }
    const double delta = std::abs(next.scale - xf.scale) +
                         geodesic_angle(next.rotation, xf.rotation) +
                         (next.translation - xf.translation).norm();
    xf = next;
    if (delta < 1e-14) break;
  }
  return xf;
}

// ---------------------------------------------------------------------------
// 3D-2D correspondences

Eigen::VectorXd correspondence_weights(const Eigen::VectorXd& point_feature, const Mask2D& mask,
                                       double sharpness) {
  if (mask.pixel_features.size() == 0 || mask.pixel_count() == 0)
    throw EmptyMask("mask has no pixels or no dense pixel features");
  const Eigen::Index n = mask.pixel_features.cols();
  Eigen::VectorXd neg_alpha(n);
  const Eigen::VectorXf f = point_feature.cast<float>();
  for (Eigen::Index i = 0; i < n; ++i)
    neg_alpha[i] = -sharpness * static_cast<double>((mask.pixel_features.col(i) - f).norm());
  const double m = neg_alpha.maxCoeff();
  Eigen::VectorXd w = (neg_alpha.array() - m).exp();
  return w / w.sum();
}

std::vector<Correspondence> correspond_3d_2d(const Eigen::MatrixXd& point_features,
                                             const Mask2D& mask, double sharpness,
                                             int max_pixels, int interior_margin) {
  if (mask.pixel_features.size() == 0 || mask.pixel_count() == 0)
    throw EmptyMask("mask has no pixels or no dense pixel features");
  const auto set_px = mask.set_pixels();
  std::vector<int> chosen;  // columns into pixel_features
  if (max_pixels > 0 && static_cast<int>(set_px.size()) > max_pixels) {
    const double stride = static_cast<double>(set_px.size()) / max_pixels;
    for (int k = 0; k < max_pixels; ++k)
      chosen.push_back(static_cast<int>(k * stride));
  } else {
    chosen.resize(set_px.size());
    std::iota(chosen.begin(), chosen.end(), 0);
  }
  const Eigen::Index n_px = static_cast<Eigen::Index>(chosen.size());
  Eigen::MatrixXf px_feats(mask.pixel_features.rows(), n_px);
  Eigen::MatrixXd px_coords(2, n_px);
  for (Eigen::Index k = 0; k < n_px; ++k) {
    px_feats.col(k) = mask.pixel_features.col(chosen[k]);
    const std::uint32_t idx = set_px[chosen[k]];
    px_coords(0, k) = static_cast<double>(idx % mask.width);
    px_coords(1, k) = static_cast<double>(idx / mask.width);
  }

  const Eigen::Index n_pts = point_features.cols();
  std::vector<Correspondence> out(n_pts);
  std::vector<std::uint8_t> keep(n_pts, 0);
  parallel_for(static_cast<std::size_t>(n_pts), [&](std::size_t j) {
    const Eigen::VectorXf f = point_features.col(static_cast<Eigen::Index>(j)).cast<float>();
    Eigen::VectorXd neg_alpha(n_px);
    for (Eigen::Index i = 0; i < n_px; ++i)
      neg_alpha[i] = -sharpness * static_cast<double>((px_feats.col(i) - f).norm());
    const double m = neg_alpha.maxCoeff();
    Eigen::VectorXd w = (neg_alpha.array() - m).exp();
    w /= w.sum();
    const Vec2 s = px_coords * w;
    // Collision filter: the soft-argmin must land inside this part's mask
    // (with the interior margin when requested).
    const int sx = static_cast<int>(std::floor(s.x() + 0.5));
    const int sy = static_cast<int>(std::floor(s.y() + 0.5));
    const int im = interior_margin;
    if (!mask.test(sx, sy)) return;
    if (im > 0 && (!mask.test(sx - im, sy - im) || !mask.test(sx + im, sy - im) ||
                   !mask.test(sx - im, sy + im) || !mask.test(sx + im, sy + im) ||
                   !mask.test(sx - im, sy) || !mask.test(sx + im, sy) ||
                   !mask.test(sx, sy - im) || !mask.test(sx, sy + im)))
      return;
    out[j] = {static_cast<int>(j), s};
    keep[j] = 1;
  });
  std::vector<Correspondence> filtered;
  filtered.reserve(n_pts);
  for (Eigen::Index j = 0; j < n_pts; ++j)
    if (keep[j]) filtered.push_back(out[j]);
  return filtered;
}

// ---------------------------------------------------------------------------
// Joint extraction

std::optional<JointParams> extract_joint(const SE3Transform& xi_o, double theta_min_deg,
                                         double prismatic_min) {
  const Vec3 log = rotation_log(xi_o.rotation);
  const double theta = log.norm();
  const double theta_min = theta_min_deg * M_PI / 180.0;
  if (theta >= theta_min) {
    JointParams j;
    j.kind = JointKind::Revolute;
    j.axis = log / theta;
    j.magnitude = theta;
    // Pivot: least-norm c with (I - R) c = T_perp; the null space of (I - R)
    // is the axis, so the minimum-norm solution is orthogonal to it.
    const Eigen::Matrix3d a = Eigen::Matrix3d::Identity() - xi_o.rotation.toRotationMatrix();
    const Vec3 t_perp = xi_o.translation - xi_o.translation.dot(j.axis) * j.axis;
    Eigen::CompleteOrthogonalDecomposition<Eigen::Matrix3d> cod(a);
    Vec3 c = cod.solve(t_perp);
    c -= c.dot(j.axis) * j.axis;
    j.pivot = c;
    return j;
  }
  const double tnorm = xi_o.translation.norm();
  if (tnorm >= prismatic_min) {
    JointParams j;
    j.kind = JointKind::Prismatic;
    j.axis = xi_o.translation / tnorm;
    j.pivot = Vec3::Zero();
    j.magnitude = tnorm;
    return j;
  }
  return std::nullopt;  // NoMotion
}

Eigen::MatrixXd MotionProblem::dense_features_t(const std::vector<int>& ids) const {
  if (dense_t.size() == 0) return field_t->dense_features(ids);
  Eigen::MatrixXd out(dense_t.rows(), ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    out.col(static_cast<Eigen::Index>(i)) = dense_t.col(ids[i]);
  return out;
}

Eigen::MatrixXd MotionProblem::dense_features_t2(const std::vector<int>& ids) const {
  if (dense_t2.size() == 0) return field_t2->dense_features(ids);
  Eigen::MatrixXd out(dense_t2.rows(), ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    out.col(static_cast<Eigen::Index>(i)) = dense_t2.col(ids[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Loss context

namespace {

struct MaskTerm {
  int part = 0;          // index into problem.parts
  int view = 0;          // target-state view id
  std::vector<PixelSample> pixels;
  Eigen::VectorXd target;  // the mask-level feature (d_feat)
};

constexpr int kMaxCorrViews = 8;
constexpr int kMaxCorrPixels = 512;
constexpr int kMaxMaskPixels = 256;

}  // namespace

class MotionLossContext {
 public:
  const MotionProblem* problem = nullptr;
  EngineConfig cfg;
  int n_parts = 0;
  std::vector<int> part_of;                 // per state-t gaussian, -1 = static path
  std::vector<Vec3> positions_t;            // state-t gaussian centers
  std::vector<double> opacities_t;
  std::vector<Eigen::MatrixXd> color_snap;  // per t' view: 3 x P
  Eigen::MatrixXd logits_snap;              // C x P
  Eigen::MatrixXd latents_snap;             // d_latent x P
  std::vector<std::vector<PixelSample>> view_pixels;  // per t' view render samples
  std::vector<std::vector<int>> pixel_class;          // per t' view, per sampled pixel
  std::vector<BoundCorrespondence> corrs;
  std::vector<MaskTerm> mask_terms;

  Eigen::Index param_dim() const { return 7 + 6 * n_parts; }
};

void MotionLossContextDeleter::operator()(MotionLossContext* p) const { delete p; }

namespace {

// Pool of per-part correspondence candidates, computed once per solve.
struct CorrPool {
  // per part (and statics appended after parts): list of (gaussian, view, pixel)
  std::vector<std::vector<BoundCorrespondence>> entries;
};

CorrPool build_corr_pool(const MotionProblem& problem, const EngineConfig& cfg,
                         RandomStream& rng) {
  CorrPool pool;
  const auto add_group = [&](const PartPair& pair, int part_index) {
    std::vector<BoundCorrespondence> list;
    if (pair.gaussians_t.empty() || pair.masks_t2.empty()) {
      pool.entries.push_back(std::move(list));
      return;
    }
    // Sample a deterministic point pool.
    std::vector<int> pts = pair.gaussians_t;
    for (int i = static_cast<int>(pts.size()) - 1; i > 0; --i)
      std::swap(pts[i], pts[rng.uniform_int(static_cast<std::uint64_t>(i) + 1)]);
    const int pool_n = std::min<int>(std::max(cfg.corr_samples_per_part, 256),
                                     static_cast<int>(pts.size()));
    pts.resize(pool_n);
    const Eigen::MatrixXd feats = problem.dense_features_t(pts);

    // Use the largest masks of the matched target proposal.
    std::vector<int> masks = pair.masks_t2;
    std::sort(masks.begin(), masks.end(), [&](int a, int b) {
      const auto pa = problem.state_t2->masks[a].pixel_count();
      const auto pb = problem.state_t2->masks[b].pixel_count();
      if (pa != pb) return pa > pb;
      return a < b;
    });
    if (static_cast<int>(masks.size()) > kMaxCorrViews) masks.resize(kMaxCorrViews);
    for (int mi : masks) {
      const Mask2D& mask = problem.state_t2->masks[mi];
      if (mask.pixel_features.size() == 0) continue;
      const auto cs = correspond_3d_2d(feats, mask, cfg.corr_sharpness, kMaxCorrPixels,
                                       /*interior_margin=*/2);
      for (const auto& c : cs)
        list.push_back({part_index, pts[c.point], mask.view_id, c.pixel});
    }
    pool.entries.push_back(std::move(list));
  };
  for (std::size_t k = 0; k < problem.parts.size(); ++k)
    add_group(problem.parts[k], static_cast<int>(k));
  for (const auto& s : problem.statics) add_group(s, -1);
  return pool;
}

std::vector<PixelSample> stratified_pixels(const Camera& cam, int budget, RandomStream& rng) {
  std::vector<PixelSample> pixels;
  const int gridn = std::max(1, static_cast<int>(std::floor(std::sqrt(double(budget)))));
  const double sx = static_cast<double>(cam.width) / gridn;
  const double sy = static_cast<double>(cam.height) / gridn;
  pixels.reserve(static_cast<std::size_t>(gridn) * gridn);
  for (int gy = 0; gy < gridn; ++gy)
    for (int gx = 0; gx < gridn; ++gx)
      pixels.push_back({std::min(cam.width - 1, static_cast<int>((gx + rng.uniform()) * sx)),
                        std::min(cam.height - 1, static_cast<int>((gy + rng.uniform()) * sy))});
  return pixels;
}

}  // namespace

MotionLossContextPtr make_loss_context(const MotionProblem& problem, const EngineConfig& cfg,
                                       const Sim3Transform& snap_xi_g,
                                       const std::vector<SE3Transform>& snap_parts,
                                       std::uint64_t seed, int corr_window) {
  MotionLossContextPtr ctx(new MotionLossContext());
  ctx->problem = &problem;
  ctx->cfg = cfg;
  ctx->n_parts = static_cast<int>(problem.parts.size());
  const SceneState& st = *problem.state_t;
  const SceneState& st2 = *problem.state_t2;
  const std::size_t P = st.gaussians.size();

  ctx->part_of.assign(P, -1);
  for (int k = 0; k < ctx->n_parts; ++k)
    for (int g : problem.parts[k].gaussians_t)
      if (ctx->part_of[g] < 0) ctx->part_of[g] = k;

  ctx->positions_t.resize(P);
  ctx->opacities_t.resize(P);
  for (std::size_t g = 0; g < P; ++g) {
    ctx->positions_t[g] = st.gaussians[g].position;
    ctx->opacities_t[g] = st.gaussians[g].opacity;
  }

  ctx->latents_snap = problem.field_t->latents();
  ctx->logits_snap = problem.field_t->logits();

  // Color snapshot: transformed pose at the snapshot parameters, evaluated
  // toward each target view. Rotated-SH evaluation goes through the
  // equivalent direction pullback.
  ctx->color_snap.resize(st2.views.size());
  const Eigen::Matrix3d rg = snap_xi_g.rotation.toRotationMatrix();
  for (std::size_t vi = 0; vi < st2.views.size(); ++vi) {
    ctx->color_snap[vi].resize(3, static_cast<Eigen::Index>(P));
    const Vec3 cam_center = st2.views[vi].camera.center();
    for (std::size_t g = 0; g < P; ++g) {
      const int k = ctx->part_of[g];
      const Vec3 m = snap_xi_g.apply(ctx->positions_t[g]);
      const Vec3 pprime = k < 0 ? m : snap_parts[k].apply(m);
      Eigen::Matrix3d rtot = rg;
      if (k >= 0) rtot = snap_parts[k].rotation.toRotationMatrix() * rg;
      Vec3 dir = pprime - cam_center;
      const double n = dir.norm();
      dir = n > 1e-12 ? Vec3(dir / n) : Vec3::UnitZ();
      ctx->color_snap[vi].col(static_cast<Eigen::Index>(g)) =
          sh_evaluate(st.gaussians[g].sh, rtot.transpose() * dir);
    }
  }

  RandomStream rng(seed);
  // Fixed render samples and label targets per target view.
  ctx->view_pixels.resize(st2.views.size());
  ctx->pixel_class.resize(st2.views.size());
  // Per-pixel class map of the target state, remapped into state-t classes.
  std::vector<std::vector<int>> class_map(st2.views.size());
  for (std::size_t vi = 0; vi < st2.views.size(); ++vi)
    class_map[vi].assign(
        static_cast<std::size_t>(st2.views[vi].camera.width) * st2.views[vi].camera.height, -1);
  for (int k = 0; k < ctx->n_parts; ++k) {
    const int class_t =
        problem.field_t->class_of_proposal(problem.parts[k].proposal_t);
    if (class_t < 0) continue;
    for (int mi : problem.parts[k].masks_t2) {
      const Mask2D& m = st2.masks[mi];
      for (auto idx : m.set_pixels())
        if (class_map[m.view_id][idx] < 0) class_map[m.view_id][idx] = class_t;
    }
  }
  for (std::size_t vi = 0; vi < st2.views.size(); ++vi) {
    ctx->view_pixels[vi] =
        stratified_pixels(st2.views[vi].camera, cfg.solve_pixels_per_step, rng);
    auto& classes = ctx->pixel_class[vi];
    classes.resize(ctx->view_pixels[vi].size());
    const int w = st2.views[vi].camera.width;
    for (std::size_t q = 0; q < classes.size(); ++q) {
      const auto& px = ctx->view_pixels[vi][q];
      classes[q] = class_map[vi][static_cast<std::size_t>(px.y) * w + px.x];
    }
  }

  // Active correspondences: rotating window over the precomputed pool.
  if (cfg.use_match) {
    RandomStream corr_rng(seed ^ 0xc0ffeeULL);
    const CorrPool pool = build_corr_pool(problem, cfg, corr_rng);
    for (const auto& entries : pool.entries) {
      if (entries.empty()) continue;
      const int want = cfg.corr_samples_per_part;
      if (static_cast<int>(entries.size()) <= want) {
        ctx->corrs.insert(ctx->corrs.end(), entries.begin(), entries.end());
      } else {
        const int start =
            (corr_window * want) % static_cast<int>(entries.size());
        for (int k = 0; k < want; ++k)
          ctx->corrs.push_back(entries[(start + k) % entries.size()]);
      }
    }
  }

  // Mask-term pixel samples (subsampled deterministically per mask).
  if (cfg.use_mask) {
    for (int k = 0; k < ctx->n_parts; ++k) {
      for (int mi : problem.parts[k].masks_t2) {
        const Mask2D& m = st2.masks[mi];
        const auto set_px = m.set_pixels();
        if (set_px.empty()) continue;
        MaskTerm term;
        term.part = k;
        term.view = m.view_id;
        const int take = std::min<int>(kMaxMaskPixels, static_cast<int>(set_px.size()));
        const double stride = static_cast<double>(set_px.size()) / take;
        term.pixels.reserve(take);
        for (int i = 0; i < take; ++i) {
          const std::uint32_t idx = set_px[static_cast<std::size_t>(i * stride)];
          term.pixels.push_back({static_cast<int>(idx % m.width),
                                 static_cast<int>(idx / m.width)});
        }
        term.target = m.feature.cast<double>();
        ctx->mask_terms.push_back(std::move(term));
      }
    }
  }
  return ctx;
}

// ---------------------------------------------------------------------------
// Loss evaluation

namespace {

struct TransformView {
  std::vector<Vec3> mapped;        // p' per state-t gaussian
  std::vector<Vec3> intermediate;  // xi_g(p) per gaussian
};

TransformView transform_all(const MotionLossContext& ctx, const Sim3Transform& xi_g,
                            const std::vector<SE3Transform>& xi_parts) {
  TransformView tv;
  const std::size_t P = ctx.positions_t.size();
  tv.mapped.resize(P);
  tv.intermediate.resize(P);
  parallel_for(P, [&](std::size_t g) {
    const Vec3 m = xi_g.apply(ctx.positions_t[g]);
    tv.intermediate[g] = m;
    const int k = ctx.part_of[g];
    tv.mapped[g] = k < 0 ? m : xi_parts[k].apply(m);
  });
  return tv;
}

// Chains dL/dp' into the tangent-space parameter gradient.
void chain_to_params(const MotionLossContext& ctx, const TransformView& tv,
                     const std::vector<Vec3>& dmapped,
                     const std::vector<SE3Transform>& xi_parts, Eigen::VectorXd& grad) {
  for (std::size_t g = 0; g < dmapped.size(); ++g) {
    const Vec3& v = dmapped[g];
    if (v.x() == 0.0 && v.y() == 0.0 && v.z() == 0.0) continue;
    const int k = ctx.part_of[g];
    const Vec3& m = tv.intermediate[g];
    const Vec3 u = k < 0 ? v : Vec3(xi_parts[k].rotation.conjugate() * v);
    grad[0] += m.dot(u);                       // d log-scale
    grad.segment<3>(1) += m.cross(u);          // d rot_g
    grad.segment<3>(4) += u;                   // d trans_g
    if (k >= 0) {
      const Vec3& pprime = tv.mapped[g];
      grad.segment<3>(7 + 6 * k) += pprime.cross(v);
      grad.segment<3>(7 + 6 * k + 3) += v;
    }
  }
}

}  // namespace

SolveEvaluation evaluate_motion_loss(const MotionLossContext& ctx, int view_id,
                                     const Sim3Transform& xi_g,
                                     const std::vector<SE3Transform>& xi_parts, bool want_grad) {
  const MotionProblem& problem = *ctx.problem;
  const SceneState& st2 = *problem.state_t2;
  const EngineConfig& cfg = ctx.cfg;
  SolveEvaluation ev;
  ev.grad.setZero(ctx.param_dim());
  const TransformView tv = transform_all(ctx, xi_g, xi_parts);
  std::vector<Vec3> dmapped(tv.mapped.size(), Vec3::Zero());

  const View& view = st2.views[view_id];

  // --- Consistency terms on the sampled view: rgb + label.
  if (cfg.use_rgb || (cfg.use_label && ctx.logits_snap.rows() > 0)) {
    SplatRenderer renderer(cfg);
    renderer.prepare(view.camera, tv.mapped, ctx.opacities_t, &view.depth);
    SplatAttributes attrs;
    if (cfg.use_rgb) attrs.color = ctx.color_snap[view_id];
    if (cfg.use_label && ctx.logits_snap.rows() > 0) attrs.logits = ctx.logits_snap;
    const auto& pixels = ctx.view_pixels[view_id];
    SplatContext sctx;
    const RenderedBuffers rb = renderer.render(attrs, pixels, &sctx);

    Eigen::MatrixXd dcolor, dlogits;
    if (cfg.use_rgb) {
      Eigen::Index n = 0;
      for (std::size_t q = 0; q < pixels.size(); ++q)
        if (!rb.empty[q]) ++n;
      if (n > 0) {
        dcolor.setZero(3, static_cast<Eigen::Index>(pixels.size()));
        const double denom = 3.0 * static_cast<double>(n);
        double acc = 0.0;
        for (std::size_t q = 0; q < pixels.size(); ++q) {
          if (rb.empty[q]) continue;
          const Vec3 target =
              view.image.at(pixels[q].x, pixels[q].y).cast<double>();
          const Vec3 diff = rb.color.col(static_cast<Eigen::Index>(q)) - target;
          acc += diff.squaredNorm();
          dcolor.col(static_cast<Eigen::Index>(q)) = (2.0 / denom) * diff;
        }
        ev.rgb = acc / denom;
      }
    }
    if (cfg.use_label && ctx.logits_snap.rows() > 0) {
      PixelTargets lt;
      lt.label = ctx.pixel_class[view_id];
      Eigen::MatrixXd dl;
      ev.label = label_loss(rb, lt, want_grad ? &dl : nullptr);
      if (want_grad) dlogits = std::move(dl);
    }
    if (want_grad && (dcolor.size() || dlogits.size())) {
      renderer.backward(sctx, attrs, rb, pixels, dcolor, Eigen::MatrixXd(), dlogits, nullptr,
                        &dmapped);
    }
  }

  // --- Mask feature terms on this view.
  if (cfg.use_mask) {
    for (const auto& term : ctx.mask_terms) {
      if (term.view != view_id) continue;
      const auto& pair = problem.parts[term.part];
      std::vector<Vec3> part_pos(pair.gaussians_t.size());
      std::vector<double> part_op(pair.gaussians_t.size());
      Eigen::MatrixXd part_lat(ctx.latents_snap.rows(), pair.gaussians_t.size());
      for (std::size_t i = 0; i < pair.gaussians_t.size(); ++i) {
        const int g = pair.gaussians_t[i];
        part_pos[i] = tv.mapped[g];
        part_op[i] = ctx.opacities_t[g];
        part_lat.col(static_cast<Eigen::Index>(i)) = ctx.latents_snap.col(g);
      }
      SplatRenderer renderer(cfg);
      renderer.prepare(view.camera, part_pos, part_op, &view.depth);
      SplatAttributes attrs;
      attrs.latent = part_lat;
      SplatContext sctx;
      const RenderedBuffers rb = renderer.render(attrs, term.pixels, &sctx);

      const Decoder& dec = problem.field_t->decoder();
      const Decoder::Output out = dec.forward(rb.latent);
      // Soft coverage: a pixel's error interpolates between the decoded
      // rendering and the uncovered penalty D(0) with c = min(1, W/w_floor),
      // so mask area the part slides off is charged continuously. A view is
      // skipped only when nothing renders at all.
      bool any_covered = false;
      for (std::size_t q = 0; q < term.pixels.size(); ++q)
        if (!rb.empty[q]) any_covered = true;
      if (!any_covered) continue;
      const Eigen::VectorXd d_zero =
          dec.forward(Eigen::MatrixXd::Zero(rb.latent.rows(), 1)).part.col(0);
      const double err_zero = (d_zero - term.target).squaredNorm();
      const double w_floor = cfg.splat_coverage_min;
      const auto n = static_cast<double>(term.pixels.size());
      double acc = 0.0;
      Eigen::MatrixXd dpart = Eigen::MatrixXd::Zero(out.part.rows(), out.part.cols());
      Eigen::VectorXd dweight = Eigen::VectorXd::Zero(term.pixels.size());
      for (std::size_t q = 0; q < term.pixels.size(); ++q) {
        const Eigen::Index qi = static_cast<Eigen::Index>(q);
        const double cov = std::min(1.0, rb.weight[qi] / w_floor);
        const Eigen::VectorXd diff = out.part.col(qi) - term.target;
        const double err_cov = diff.squaredNorm();
        acc += cov * err_cov + (1.0 - cov) * err_zero;
        if (want_grad) {
          dpart.col(qi) = (2.0 * cov / n) * diff;
          if (rb.weight[qi] < w_floor && !rb.empty[q])
            dweight[qi] = (err_cov - err_zero) / (w_floor * n);
        }
      }
      ev.mask += acc / n;
      if (want_grad) {
        const Eigen::MatrixXd dlat = dec.backward(
            rb.latent, out, Eigen::MatrixXd(), dpart, Eigen::MatrixXd(), nullptr);
        std::vector<Vec3> dpart_pos(part_pos.size(), Vec3::Zero());
        renderer.backward(sctx, attrs, rb, term.pixels, Eigen::MatrixXd(), dlat,
                          Eigen::MatrixXd(), nullptr, &dpart_pos, dweight);
        for (std::size_t i = 0; i < pair.gaussians_t.size(); ++i)
          dmapped[pair.gaussians_t[i]] += dpart_pos[i];
      }
    }
  }

  // --- Matching term over all bound correspondences.
  std::vector<Vec3> dmatch;
  if (want_grad) dmatch.assign(tv.mapped.size(), Vec3::Zero());
  if (cfg.use_match && !ctx.corrs.empty()) {
    double acc = 0.0;
    int n = 0;
    for (const auto& c : ctx.corrs) {
      const Camera& cam = st2.views[c.view].camera;
      const auto proj = try_project(cam, tv.mapped[c.gaussian]);
      if (!proj) continue;  // behind camera: pair not retained
      acc += (proj->pixel - c.pixel).squaredNorm();
      ++n;
    }
    if (n > 0) {
      ev.match = acc / n;
      if (want_grad) {
        for (const auto& c : ctx.corrs) {
          const Camera& cam = st2.views[c.view].camera;
          const auto proj = try_project(cam, tv.mapped[c.gaussian]);
          if (!proj) continue;
          const Vec2 d_px = (2.0 / n) * (proj->pixel - c.pixel);
          dmatch[c.gaussian] +=
              projection_jacobian(cam, tv.mapped[c.gaussian]).transpose() * d_px;
        }
      }
    }
  }

  ev.total = cfg.lambda_cons * (ev.rgb + ev.mask + ev.label) + cfg.lambda_match * ev.match;
  if (want_grad) {
    for (std::size_t g = 0; g < dmapped.size(); ++g)
      dmapped[g] = cfg.lambda_cons * dmapped[g] + cfg.lambda_match * dmatch[g];
    chain_to_params(ctx, tv, dmapped, xi_parts, ev.grad);
  }
  return ev;
}

double mask_feature_loss(const MotionProblem& problem, int part_index, const Sim3Transform& xi_g,
                         const SE3Transform& xi_o, const EngineConfig& cfg) {
  const SceneState& st = *problem.state_t;
  const SceneState& st2 = *problem.state_t2;
  const PartPair& pair = problem.parts[part_index];
  const Decoder& dec = problem.field_t->decoder();

  std::vector<Vec3> part_pos(pair.gaussians_t.size());
  std::vector<double> part_op(pair.gaussians_t.size());
  Eigen::MatrixXd part_lat(problem.field_t->latents().rows(), pair.gaussians_t.size());
  for (std::size_t i = 0; i < pair.gaussians_t.size(); ++i) {
    const int g = pair.gaussians_t[i];
    part_pos[i] = xi_o.apply(xi_g.apply(st.gaussians[g].position));
    part_op[i] = st.gaussians[g].opacity;
    part_lat.col(static_cast<Eigen::Index>(i)) = problem.field_t->latents().col(g);
  }

  double loss = 0.0;
  for (int mi : pair.masks_t2) {
    const Mask2D& m = st2.masks[mi];
    const auto set_px = m.set_pixels();
    if (set_px.empty()) continue;
    std::vector<PixelSample> pixels(set_px.size());
    for (std::size_t i = 0; i < set_px.size(); ++i)
      pixels[i] = {static_cast<int>(set_px[i] % m.width), static_cast<int>(set_px[i] / m.width)};
    SplatRenderer renderer(cfg);
    renderer.prepare(st2.views[m.view_id].camera, part_pos, part_op,
                     &st2.views[m.view_id].depth);
    const SplatAttributes attrs{Eigen::MatrixXd(), part_lat, Eigen::MatrixXd()};
    const RenderedBuffers rb = renderer.render(attrs, pixels);
    const Decoder::Output out = dec.forward(rb.latent);
    const Eigen::VectorXd target = m.feature.cast<double>();
    const Eigen::VectorXd d_zero =
        dec.forward(Eigen::MatrixXd::Zero(rb.latent.rows(), 1)).part.col(0);
    const double err_zero = (d_zero - target).squaredNorm();
    bool any_covered = false;
    double acc = 0.0;
    for (std::size_t q = 0; q < pixels.size(); ++q) {
      const Eigen::Index qi = static_cast<Eigen::Index>(q);
      if (!rb.empty[q]) any_covered = true;
      const double cov = std::min(1.0, rb.weight[qi] / cfg.splat_coverage_min);
      acc += cov * (out.part.col(qi) - target).squaredNorm() + (1.0 - cov) * err_zero;
    }
    if (any_covered) loss += acc / static_cast<double>(m.pixel_count());
  }
  return loss;
}

double match_loss(const MotionProblem& problem, const std::vector<BoundCorrespondence>& corrs,
                  const Sim3Transform& xi_g, const std::vector<SE3Transform>& xi_parts) {
  if (corrs.empty()) throw NoCorrespondences("no 3D-2D correspondences to score");
  const SceneState& st = *problem.state_t;
  const SceneState& st2 = *problem.state_t2;
  double acc = 0.0;
  int n = 0;
  for (const auto& c : corrs) {
    const Vec3 p = st.gaussians[c.gaussian].position;
    const Vec3 mapped =
        c.part < 0 ? xi_g.apply(p) : xi_parts[c.part].apply(xi_g.apply(p));
    const auto proj = try_project(st2.views[c.view].camera, mapped);
    if (!proj) continue;
    acc += (proj->pixel - c.pixel).squaredNorm();
    ++n;
  }
  if (n == 0) throw NoCorrespondences("all correspondences project behind the camera");
  return acc / n;
}

// ---------------------------------------------------------------------------
// Joint solve

namespace {

// Per-part rigid initialization from dense-feature nearest neighbors between
// the matched proposals' gaussians (both sides decoded into the shared dense
// feature space). Falls back to identity when matching fails.
SE3Transform init_part_rigid(const MotionProblem& problem, const PartPair& pair,
                             const Sim3Transform& xi_g) {
  if (pair.gaussians_t.size() < 3 || pair.gaussians_t2.size() < 3)
    return SE3Transform::identity();
  const Eigen::MatrixXd f_t = problem.dense_features_t(pair.gaussians_t);
  const Eigen::MatrixXd f_t2 = problem.dense_features_t2(pair.gaussians_t2);
  std::vector<Vec3> src(pair.gaussians_t.size()), dst(pair.gaussians_t.size());
  parallel_for(pair.gaussians_t.size(), [&](std::size_t i) {
    int best_j = 0;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < f_t2.cols(); ++j) {
      const double d = (f_t.col(static_cast<Eigen::Index>(i)) - f_t2.col(j)).squaredNorm();
      if (d < best) {
        best = d;
        best_j = static_cast<int>(j);
      }
    }
    src[i] = xi_g.apply(problem.state_t->gaussians[pair.gaussians_t[i]].position);
    dst[i] = problem.state_t2->gaussians[pair.gaussians_t2[best_j]].position;
  });
  try {
    SE3Transform est = umeyama_se3(src, dst);
    // One trim pass against gross mismatches.
    struct R {
      double d2;
      std::size_t i;
    };
    std::vector<R> res(src.size());
    for (std::size_t i = 0; i < src.size(); ++i)
      res[i] = {(est.apply(src[i]) - dst[i]).squaredNorm(), i};
    std::sort(res.begin(), res.end(), [](const R& a, const R& b) {
      if (a.d2 != b.d2) return a.d2 < b.d2;
      return a.i < b.i;
    });
    const std::size_t keep = std::max<std::size_t>(3, (res.size() * 7) / 10);
    std::vector<Vec3> s2(keep), d2(keep);
    for (std::size_t k = 0; k < keep; ++k) {
      s2[k] = src[res[k].i];
      d2[k] = dst[res[k].i];
    }
    est = umeyama_se3(s2, d2);
    if (std::isfinite(est.translation.norm())) return est;
  } catch (const Error&) {
  }
  return SE3Transform::identity();
}

}  // namespace

MotionSolution solve_motion(const MotionProblem& problem, const EngineConfig& cfg,
                            std::uint64_t seed) {
  if (cfg.lambda_cons == 0.0 && cfg.lambda_match == 0.0)
    throw SpecError("loss weights must not both be zero");
  if (cfg.lambda_cons < 0.0 || cfg.lambda_match < 0.0)
    throw SpecError("loss weights must be nonnegative");

  MotionSolution sol;
  sol.xi_g = problem.xi_g_init;
  const int n_parts = static_cast<int>(problem.parts.size());
  std::vector<SE3Transform> xi_parts(n_parts);
  if (cfg.use_match) {
    for (int k = 0; k < n_parts; ++k)
      xi_parts[k] = init_part_rigid(problem, problem.parts[k], sol.xi_g);
  }

  const int n_views = static_cast<int>(problem.state_t2->views.size());
  Adam adam(7 + 6 * n_parts, cfg.solve_lr);
  MotionLossContextPtr ctx;
  std::vector<double> recent;
  recent.reserve(cfg.solve_max_steps);
  int refresh_count = 0;

  for (int step = 0; step < cfg.solve_max_steps; ++step) {
    if (step % cfg.corr_refresh_every == 0) {
      ctx = make_loss_context(problem, cfg, sol.xi_g, xi_parts,
                              seed ^ (0x9e3779b97f4a7c15ULL * (refresh_count + 1)),
                              refresh_count);
      ++refresh_count;
    }
    const int view_id = step % n_views;
    SolveEvaluation ev = evaluate_motion_loss(*ctx, view_id, sol.xi_g, xi_parts, true);
    if (!std::isfinite(ev.total)) throw Diverged("loss is not finite at step " +
                                                 std::to_string(step));
    sol.steps = step + 1;
    if (step % 10 == 0 || step + 1 == cfg.solve_max_steps)
      sol.trace.push_back({step, ev.total, ev.rgb, ev.mask, ev.label, ev.match});

    // Convergence: relative change below tolerance across the whole window.
    recent.push_back(ev.total);
    if (static_cast<int>(recent.size()) > cfg.solve_tol_window + 1) {
      bool converged = true;
      const std::size_t last = recent.size() - 1;
      for (int k = 1; k <= cfg.solve_tol_window; ++k) {
        const double prev = recent[last - k];
        if (std::abs(recent[last] - prev) > cfg.solve_rel_tol * std::max(std::abs(prev), 1e-12)) {
          converged = false;
          break;
        }
      }
      if (converged) {
        sol.converged = true;
        break;
      }
    }

    Eigen::VectorXd delta = Eigen::VectorXd::Zero(ev.grad.size());
    adam.step(delta, ev.grad);
    const double decay =
        std::pow(cfg.solve_lr_decay, static_cast<double>(step) / cfg.corr_refresh_every);
    delta *= decay;
    delta.head<7>() *= cfg.solve_global_lr_scale;
    const Sim3Transform inc_g{std::exp(delta[0]),
                              quat_from_axis_angle(delta.segment<3>(1), delta.segment<3>(1).norm()),
                              delta.segment<3>(4)};
    sol.xi_g = inc_g.compose(sol.xi_g);
    for (int k = 0; k < n_parts; ++k) {
      const Vec3 w = delta.segment<3>(7 + 6 * k);
      const SE3Transform inc{quat_from_axis_angle(w, w.norm()), delta.segment<3>(7 + 6 * k + 3)};
      xi_parts[k] = inc.compose(xi_parts[k]);
    }
  }

  if (cfg.use_match) {
    // Closed-form consolidation: descent handles the coupled refinement, the
    // final transforms come from the same nearest-neighbor geometry with the
    // first-order solver noise removed.
    // Static pool: gaussians outside every part pair, plus parts the solve
    // itself found motionless.
    std::vector<std::uint8_t> in_part(problem.state_t->gaussians.size(), 0);
    for (int k = 0; k < n_parts; ++k) {
      double max_disp = 0.0;
      for (int g : problem.parts[k].gaussians_t) {
        const Vec3 x = sol.xi_g.apply(problem.state_t->gaussians[g].position);
        max_disp = std::max(max_disp, (xi_parts[k].apply(x) - x).norm());
      }
      const bool moving = max_disp >= cfg.motion_min;
      for (int g : problem.parts[k].gaussians_t) in_part[g] = moving ? 1 : 0;
    }
    std::vector<int> static_ids;
    for (int g = 0; g < static_cast<int>(problem.state_t->gaussians.size()); ++g)
      if (!in_part[g]) static_ids.push_back(g);
    if (static_ids.size() >= 3) {
      std::vector<Vec3> src;
      src.reserve(static_ids.size());
      for (int g : static_ids) src.push_back(problem.state_t->gaussians[g].position);
      std::vector<Vec3> dst(problem.state_t2->gaussians.size());
      for (std::size_t g = 0; g < dst.size(); ++g)
        dst[g] = problem.state_t2->gaussians[g].position;
      sol.xi_g = trimmed_icp_sim3(src, dst, sol.xi_g, cfg);
    }
    for (int k = 0; k < n_parts; ++k)
      xi_parts[k] = init_part_rigid(problem, problem.parts[k], sol.xi_g);
  }

  for (int k = 0; k < n_parts; ++k) {
    PartSolution ps;
    ps.pair = problem.parts[k];
    ps.xi_o = xi_parts[k];
    ps.joint = extract_joint(xi_parts[k], cfg.theta_min_deg, cfg.prismatic_min);
    sol.parts.push_back(std::move(ps));
  }
  return sol;
}

}  // namespace splatjoint
