// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include <doctest.h>

#include "helpers.hpp"
#include "splatjoint/feature_field.hpp"
#include "splatjoint/pipeline.hpp"

using namespace splatjoint;
using namespace splatjoint::testhelpers;

namespace {

EngineConfig test_cfg() {
  EngineConfig cfg;
  cfg.distill_steps = 600;
  cfg.distill_pixels_per_step = 900;
  return cfg;
}

// Relative error between analytic and finite-difference gradients.
double rel_err(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-8});
}

}  // namespace

TEST_CASE("splat render reproduces a single gaussian's attributes") {
  const EngineConfig cfg;
  SplatRenderer renderer(cfg);
  const Camera cam = look_down_z();
  renderer.prepare(cam, {Vec3(0, 0, 1)}, {1.0});
  SplatAttributes attrs;
  attrs.color.resize(3, 1);
  attrs.color << 0.2, 0.4, 0.8;
  attrs.latent.resize(2, 1);
  attrs.latent << 1.5, -2.5;
  const RenderedBuffers out = renderer.render(attrs, {{32, 32}});  // c = 31.5 -> px 32?
  // The principal point is (31.5, 31.5); pixel (32,32) is within radius.
  CHECK(!out.empty[0]);
  CHECK((out.color.col(0) - attrs.color.col(0)).norm() < 1e-12);
  CHECK((out.latent.col(0) - attrs.latent.col(0)).norm() < 1e-12);
}

TEST_CASE("splat render averages two equidistant equal-opacity gaussians") {
  const EngineConfig cfg;
  SplatRenderer renderer(cfg);
  Camera cam = look_down_z(64, 100.0);
  // Symmetric offsets around the principal point.
  renderer.prepare(cam, {Vec3(0.01, 0, 1), Vec3(-0.01, 0, 1)}, {0.8, 0.8});
  SplatAttributes attrs;
  attrs.latent.resize(1, 2);
  attrs.latent << 4.0, 2.0;
  const int cpx = static_cast<int>(cam.cx);  // 31
  const RenderedBuffers out =
      renderer.render(attrs, {{cpx, static_cast<int>(cam.cy)}});
  // Pixel (31,31) is not exactly the symmetry center (31.5): use the exact
  // center instead by checking the analytic weights.
  CHECK(!out.empty[0]);
  const double w1 = std::exp(-std::pow(101.5 - 31.0 - 70.0 - 1.0, 2));  // placeholder
  (void)w1;
  // Symmetric check at the true center via a camera with odd-center alignment.
  Camera cam2 = look_down_z(65, 100.0);  // cx = 32 exactly at a pixel center
  renderer.prepare(cam2, {Vec3(0.01, 0, 1), Vec3(-0.01, 0, 1)}, {0.8, 0.8});
  const RenderedBuffers out2 = renderer.render(attrs, {{32, 32}});
  CHECK(!out2.empty[0]);
  CHECK(out2.latent(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("splat render is invariant to gaussian order") {
  const EngineConfig cfg;
  RandomStream rng(51);
  std::vector<Vec3> pos(40);
  std::vector<double> op(40);
  Eigen::MatrixXd lat(3, 40);
  for (int i = 0; i < 40; ++i) {
    pos[i] = Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), 1.0 + rng.uniform(0, 0.2));
    op[i] = rng.uniform(0.5, 1.0);
    lat.col(i) = Vec3(rng.normal(), rng.normal(), rng.normal());
  }
  std::vector<PixelSample> pixels;
  for (int y = 20; y < 44; y += 3)
    for (int x = 20; x < 44; x += 3) pixels.push_back({x, y});

  SplatRenderer renderer(cfg);
  const Camera cam = look_down_z();
  renderer.prepare(cam, pos, op);
  SplatAttributes attrs;
  attrs.latent = lat;
  const RenderedBuffers a = renderer.render(attrs, pixels);

  // Reversed order with permuted attribute columns.
  std::vector<Vec3> pos_r(pos.rbegin(), pos.rend());
  std::vector<double> op_r(op.rbegin(), op.rend());
  Eigen::MatrixXd lat_r(3, 40);
  for (int i = 0; i < 40; ++i) lat_r.col(i) = lat.col(39 - i);
  renderer.prepare(cam, pos_r, op_r);
  SplatAttributes attrs_r;
  attrs_r.latent = lat_r;
  const RenderedBuffers b = renderer.render(attrs_r, pixels);
  CHECK((a.latent - b.latent).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.weight - b.weight).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("renderer gradients match finite differences") {
  const EngineConfig cfg;
  RandomStream rng(53);
  const Camera cam = look_down_z();
  std::vector<Vec3> pos(12);
  std::vector<double> op(12);
  Eigen::MatrixXd lat(4, 12);
  for (int i = 0; i < 12; ++i) {
    pos[i] = Vec3(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), 1.0 + rng.uniform(0, 0.1));
    op[i] = rng.uniform(0.5, 1.0);
    for (int r = 0; r < 4; ++r) lat(r, i) = rng.normal();
  }
  std::vector<PixelSample> pixels = {{30, 30}, {32, 33}, {28, 35}, {34, 29}};

  // Scalar probe loss: sum of rendered entries squared.
  const auto loss_of = [&](const std::vector<Vec3>& p, const Eigen::MatrixXd& l,
                           RenderedBuffers* out_buf = nullptr, SplatContext* ctx = nullptr) {
    SplatRenderer r(cfg);
    r.prepare(cam, p, op);
    SplatAttributes attrs;
    attrs.latent = l;
    const RenderedBuffers out = r.render(attrs, pixels, ctx);
    double loss = 0.0;
    for (Eigen::Index q = 0; q < out.latent.cols(); ++q)
      if (!out.empty[q]) loss += out.latent.col(q).squaredNorm();
    if (out_buf) *out_buf = out;
    return loss;
  };

  RenderedBuffers out;
  SplatContext ctx;
  loss_of(pos, lat, &out, &ctx);
  Eigen::MatrixXd dout = Eigen::MatrixXd::Zero(4, pixels.size());
  for (Eigen::Index q = 0; q < dout.cols(); ++q)
    if (!out.empty[q]) dout.col(q) = 2.0 * out.latent.col(q);

  SplatRenderer r(cfg);
  r.prepare(cam, pos, op);
  SplatAttributes attrs;
  attrs.latent = lat;
  SplatAttributes grads;
  grads.latent.setZero(4, 12);
  std::vector<Vec3> dpos(12, Vec3::Zero());
  r.backward(ctx, attrs, out, pixels, Eigen::MatrixXd(), dout, Eigen::MatrixXd(), &grads,
             &dpos);

  const double h = 1e-6;
  // Latent gradient entries.
  for (int i : {0, 3, 7}) {
    for (int rr : {0, 2}) {
      Eigen::MatrixXd lp = lat, lm = lat;
      lp(rr, i) += h;
      lm(rr, i) -= h;
      const double fd = (loss_of(pos, lp) - loss_of(pos, lm)) / (2 * h);
      CHECK(rel_err(grads.latent(rr, i), fd) < 1e-4);
    }
  }
  // Position gradients.
  for (int i : {1, 5, 9}) {
    for (int a = 0; a < 3; ++a) {
      std::vector<Vec3> pp = pos, pm = pos;
      pp[i][a] += h;
      pm[i][a] -= h;
      const double fd = (loss_of(pp, lat) - loss_of(pm, lat)) / (2 * h);
      if (std::abs(fd) < 1e-10 && std::abs(dpos[i][a]) < 1e-10) continue;
      CHECK(rel_err(dpos[i][a], fd) < 1e-4);
    }
  }
}

TEST_CASE("feat_loss analytic values") {
  RandomStream rng(57);
  Decoder dec(4, 16, 6, 5, rng);
  RenderedBuffers rendered;
  rendered.latent.resize(4, 3);
  for (int q = 0; q < 3; ++q)
    for (int r = 0; r < 4; ++r) rendered.latent(r, q) = rng.normal();
  rendered.empty.assign(3, 0);
  const Decoder::Output out = dec.forward(rendered.latent);

  PixelTargets t;
  t.instance = out.instance;
  t.part = out.part;
  t.dense = out.dense;
  t.has_instance.assign(3, 1);
  t.has_part.assign(3, 1);
  t.has_dense.assign(3, 1);
  t.label.assign(3, -1);
  CHECK(feat_loss(rendered, dec, t) == doctest::Approx(0.0));

  // Shift every target entry by c: each branch contributes c^2.
  const double c = 0.37;
  t.instance.array() += c;
  t.part.array() += c;
  t.dense.array() += c;
  CHECK(feat_loss(rendered, dec, t) == doctest::Approx(3.0 * c * c).epsilon(1e-9));
}

TEST_CASE("feat_loss gradients match finite differences") {
  RandomStream rng(59);
  Decoder dec(4, 8, 5, 3, rng);
  RenderedBuffers rendered;
  rendered.latent.resize(4, 5);
  for (int q = 0; q < 5; ++q)
    for (int r = 0; r < 4; ++r) rendered.latent(r, q) = rng.normal();
  rendered.empty.assign(5, 0);
  rendered.empty[2] = 1;  // one empty pixel must be excluded
  PixelTargets t;
  t.instance.resize(5, 5);
  t.part.resize(5, 5);
  t.dense.resize(3, 5);
  for (Eigen::Index q = 0; q < 5; ++q) {
    for (int r = 0; r < 5; ++r) {
      t.instance(r, q) = rng.normal();
      t.part(r, q) = rng.normal();
    }
    for (int r = 0; r < 3; ++r) t.dense(r, q) = rng.normal();
  }
  t.has_instance.assign(5, 1);
  t.has_part.assign(5, 1);
  t.has_dense.assign(5, 1);
  t.has_part[4] = 0;  // partial coverage
  t.label.assign(5, -1);

  FeatLossGrads grads;
  feat_loss(rendered, dec, t, &grads);

  const double h = 1e-6;
  for (const auto [r, q] : std::vector<std::pair<int, int>>{{0, 0}, {3, 1}, {2, 4}}) {
    RenderedBuffers rp = rendered, rm = rendered;
    rp.latent(r, q) += h;
    rm.latent(r, q) -= h;
    const double fd = (feat_loss(rp, dec, t) - feat_loss(rm, dec, t)) / (2 * h);
    CHECK(rel_err(grads.dlatent(r, q), fd) < 1e-4);
  }
  // Decoder parameter gradient spot checks.
  Eigen::VectorXd params = dec.params();
  for (Eigen::Index k : {Eigen::Index(0), params.size() / 2, params.size() - 1}) {
    Decoder dp = dec, dm = dec;
    Eigen::VectorXd pp = params, pm = params;
    pp[k] += h;
    pm[k] -= h;
    dp.set_params(pp);
    dm.set_params(pm);
    const double fd = (feat_loss(rendered, dp, t) - feat_loss(rendered, dm, t)) / (2 * h);
    CHECK(rel_err(grads.ddecoder[k], fd) < 1e-4);
  }
}

TEST_CASE("label_loss analytic values and gradient") {
  const int C = 7;
  RenderedBuffers rendered;
  rendered.logits = Eigen::MatrixXd::Zero(C, 2);
  rendered.empty.assign(2, 0);
  PixelTargets t;
  t.label = {3, 1};
  CHECK(label_loss(rendered, t) == doctest::Approx(std::log(double(C))).epsilon(1e-12));

  // One-hot limit: a large margin drives the loss to zero.
  rendered.logits(3, 0) = 50.0;
  rendered.logits(1, 1) = 50.0;
  CHECK(label_loss(rendered, t) < 1e-12);

  RandomStream rng(61);
  rendered.logits.setZero();
  for (int q = 0; q < 2; ++q)
    for (int r = 0; r < C; ++r) rendered.logits(r, q) = rng.normal();
  Eigen::MatrixXd dlogits;
  label_loss(rendered, t, &dlogits);
  const double h = 1e-6;
  for (const auto [r, q] : std::vector<std::pair<int, int>>{{0, 0}, {3, 0}, {6, 1}}) {
    RenderedBuffers rp = rendered, rm = rendered;
    rp.logits(r, q) += h;
    rm.logits(r, q) -= h;
    const double fd = (label_loss(rp, t) - label_loss(rm, t)) / (2 * h);
    CHECK(rel_err(dlogits(r, q), fd) < 1e-4);
  }
}

TEST_CASE("distillation fits the oracle fields") {
  OracleSpec spec67 = small_fridge(67);
  for (auto& p : spec67.parts) p.gaussian_count *= 2;  // splat-radius coverage
  OraclePair pair = generate_pair(spec67);
  const EngineConfig cfg = test_cfg();
  SceneState& state = pair.state_t;
  const auto proposals = cluster_state(state, cfg);
  FeatureField field(state, proposals, cfg, 99);
  const DistillStats stats = field.distill(state);

  REQUIRE(stats.feat_trace.size() > 2);
  // Some logged steps fall on views without masks (loss 0); compare the
  // first and last supervised steps.
  double first = 0.0, last = 0.0;
  for (const double v : stats.feat_trace)
    if (v > 0.0) {
      first = v;
      break;
    }
  for (auto it = stats.feat_trace.rbegin(); it != stats.feat_trace.rend(); ++it)
    if (*it > 0.0) {
      last = *it;
      break;
    }
  REQUIRE(first > 0.0);
  REQUIRE(last > 0.0);
  CHECK(first / last > 10.0);

  // Label field accuracy >= 0.98 against the cluster-assigned mask labels.
  std::size_t correct = 0, total = 0;
  SplatRenderer renderer(cfg);
  std::vector<Vec3> pos(state.gaussians.size());
  std::vector<double> op(state.gaussians.size());
  for (std::size_t g = 0; g < state.gaussians.size(); ++g) {
    pos[g] = state.gaussians[g].position;
    op[g] = state.gaussians[g].opacity;
  }
  for (int vi = 0; vi < static_cast<int>(state.views.size()); vi += 2) {
    renderer.prepare(state.views[vi].camera, pos, op, &state.views[vi].depth);
    std::vector<PixelSample> pixels;
    const int W = state.views[vi].camera.width;
    for (int y = 0; y < state.views[vi].camera.height; y += 4)
      for (int x = 0; x < W; x += 4) pixels.push_back({x, y});
    SplatAttributes attrs;
    attrs.logits = field.logits();
    const RenderedBuffers out = renderer.render(attrs, pixels);
    const PixelTargets targets = field.targets_for(state, vi, pixels);
    for (std::size_t q = 0; q < pixels.size(); ++q) {
      if (targets.label[q] < 0 || out.empty[q]) continue;
      Eigen::Index arg;
      out.logits.col(static_cast<Eigen::Index>(q)).maxCoeff(&arg);
      ++total;
      if (static_cast<int>(arg) == targets.label[q]) ++correct;
    }
  }
  REQUIRE(total > 200);
  CHECK(static_cast<double>(correct) / total >= 0.98);
}
