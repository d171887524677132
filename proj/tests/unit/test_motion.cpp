// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include <doctest.h>

#include "helpers.hpp"
#include "splatjoint/motion.hpp"
#include "splatjoint/pipeline.hpp"

using namespace splatjoint;
using namespace splatjoint::testhelpers;

namespace {

double rel_err(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-8});
}

EngineConfig fast_cfg() {
  EngineConfig cfg;
  cfg.distill_steps = 500;
  cfg.distill_pixels_per_step = 900;
  cfg.solve_max_steps = 400;
  cfg.solve_pixels_per_step = 700;
  return cfg;
}

}  // namespace

TEST_CASE("map_point basics and inverse round trip") {
  CHECK((map_point({1, 2, 3}, true, Sim3Transform::identity()) - Vec3(1, 2, 3)).norm() == 0.0);
  SE3Transform rot;
  rot.rotation = quat_from_axis_angle({0, 0, 1}, M_PI / 2.0);
  CHECK((map_point({1, 0, 0}, false, Sim3Transform::identity(), rot) - Vec3(0, 1, 0)).norm() <
        1e-12);

  RandomStream rng(101);
  for (int i = 0; i < 30; ++i) {
    Sim3Transform xi_g;
    xi_g.scale = rng.uniform(0.5, 2.0);
    xi_g.rotation = quat_from_axis_angle(rng.unit_vector(), rng.uniform(0, M_PI));
    xi_g.translation = Vec3(rng.normal(), rng.normal(), rng.normal());
    SE3Transform xi_o;
    xi_o.rotation = quat_from_axis_angle(rng.unit_vector(), rng.uniform(0, M_PI));
    xi_o.translation = Vec3(rng.normal(), rng.normal(), rng.normal());
    const Vec3 p(rng.normal(), rng.normal(), rng.normal());
    const Vec3 fwd = map_point(p, false, xi_g, xi_o);
    CHECK((map_point_inverse(fwd, false, xi_g, xi_o) - p).norm() < 1e-7);
    const Vec3 fwd_s = map_point(p, true, xi_g);
    CHECK((map_point_inverse(fwd_s, true, xi_g) - p).norm() < 1e-7);
  }
}

TEST_CASE("init_global recovers a known similarity exactly") {
  RandomStream rng(103);
  const int n = 300;
  RegistrationInput a, b;
  a.features.resize(16, n);
  b.features.resize(16, n);
  for (int i = 0; i < n; ++i) {
    a.points.emplace_back(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                          rng.uniform(-0.5, 0.5));
    a.opacities.push_back(rng.uniform(0.75, 1.0));
    for (int k = 0; k < 16; ++k) a.features(k, i) = rng.normal();
  }
  Sim3Transform xf;
  xf.scale = 1.13;
  xf.rotation = quat_from_axis_angle(rng.unit_vector(), 2.1);
  xf.translation = Vec3(0.4, -0.2, 0.3);
  for (int i = 0; i < n; ++i) {
    b.points.push_back(xf.apply(a.points[i]));
    b.opacities.push_back(a.opacities[i]);
  }
  b.features = a.features;

  const EngineConfig cfg;
  RandomStream reg_rng(7);
  const Sim3Transform est = init_global(a, b, 0.7, cfg, reg_rng);
  CHECK(geodesic_angle(est.rotation, xf.rotation) < 1e-6);
  CHECK(std::abs(est.scale - xf.scale) < 1e-9);
  CHECK((est.translation - xf.translation).norm() < 1e-7);

  // Identity case.
  RandomStream reg_rng2(8);
  const Sim3Transform ident = init_global(a, a, 0.7, cfg, reg_rng2);
  CHECK(geodesic_angle(ident.rotation, Quat::Identity()) < 1e-7);
  CHECK(std::abs(ident.scale - 1.0) < 1e-9);
  CHECK(ident.translation.norm() < 1e-8);
}

TEST_CASE("init_global degenerate inputs") {
  const EngineConfig cfg;
  RandomStream rng(104);
  RegistrationInput two;
  two.points = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  CHECK_THROWS_AS(init_global(two, two, 0.0, cfg, rng), DegenerateGeometry);

  RegistrationInput line;
  for (int i = 0; i < 50; ++i) line.points.emplace_back(i * 0.01, 0.0, 0.0);
  CHECK_THROWS_AS(init_global(line, line, 0.0, cfg, rng), DegenerateGeometry);
}

TEST_CASE("correspondence weights: symmetry, distribution, sharp limit") {
  SceneState s = single_view_scene(64, 10);
  Mask2D& mask = s.masks[0];
  // Two-pixel mask at (22,32) and (42,32) with equal features: the weighted
  // sum sits at the midpoint for any sharpness.
  mask.bitmap.assign(mask.bitmap.size(), 0);
  mask.bitmap[32 * 64 + 22] = 1;
  mask.bitmap[32 * 64 + 42] = 1;
  mask.pixel_features = Eigen::MatrixXf::Zero(s.d_dense, 2);
  const Eigen::VectorXd f = Eigen::VectorXd::Zero(s.d_dense);

  for (double sharpness : {1.0, 10.0, 50.0}) {
    const Eigen::VectorXd beta = correspondence_weights(f, mask, sharpness);
    CHECK(beta.size() == 2);
    CHECK(beta.sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(beta.minCoeff() >= 0.0);
    CHECK(beta[0] == doctest::Approx(0.5));
  }
  // The midpoint (32,32) is outside this two-pixel mask, so the collision
  // filter drops the pair; with a filled strip it is kept at the midpoint.
  CHECK(correspond_3d_2d(f, mask, 10.0).empty());
  for (int x = 22; x <= 42; ++x) mask.bitmap[32 * 64 + x] = 1;
  mask.pixel_features = Eigen::MatrixXf::Zero(s.d_dense, 21);
  const auto corrs = correspond_3d_2d(f, mask, 10.0);
  REQUIRE(corrs.size() == 1);
  CHECK(corrs[0].pixel.x() == doctest::Approx(32.0));
  CHECK(corrs[0].pixel.y() == doctest::Approx(32.0));

  // Sharpness limit: a unique best pixel takes all the weight.
  mask.pixel_features(0, 1) = 5.0f;  // second pixel far in feature space
  const Eigen::VectorXd sharp = correspondence_weights(f, mask, 200.0);
  CHECK(sharp[0] == doctest::Approx(1.0).epsilon(1e-9));

  Mask2D empty = mask;
  empty.pixel_features.resize(0, 0);
  CHECK_THROWS_AS(correspondence_weights(f, empty, 10.0), EmptyMask);
}

TEST_CASE("oracle correspondences land within 1.5 px at sigma 0.02") {
  OracleSpec spec = small_fridge(107);
  spec.feature_sigma = 0.02;
  const OraclePair pair = generate_pair(spec);
  const auto& door = pair.gt.parts[1];
  REQUIRE(!door.members_t2.empty());

  std::vector<int> members = door.members_t2;
  std::sort(members.begin(), members.end());
  const EngineConfig defaults;
  int tested = 0;
  double worst = 0.0;
  for (const auto& mask : pair.state_t2.masks) {
    if (mask.level != MaskLevel::Part) continue;
    if (visible_gaussians(pair.state_t2, mask, defaults.opacity_min, defaults.depth_tol) !=
        members)
      continue;
    // Sample a subset of door points with their noise-free dense codes.
    const int n_pts = std::min<int>(64, static_cast<int>(door.members_t2.size()));
    Eigen::MatrixXd codes(door.dense_codes.rows(), n_pts);
    std::vector<Vec2> truth(n_pts);
    for (int k = 0; k < n_pts; ++k) {
      codes.col(k) = door.dense_codes.col(k);
      truth[k] = project(pair.state_t2.views[mask.view_id].camera,
                         pair.state_t2.gaussians[door.members_t2[k]].position);
    }
    const auto corrs = correspond_3d_2d(codes, mask, 10.0);
    CHECK(corrs.size() >= static_cast<std::size_t>(n_pts / 2));
    for (const auto& c : corrs) {
      const double err = (c.pixel - truth[c.point]).norm();
      worst = std::max(worst, err);
      CHECK(err <= 1.5);
      ++tested;
    }
  }
  CHECK(tested > 100);
}

TEST_CASE("extract_joint revolute, prismatic and no-motion cases") {
  // Revolute about z through (1,1,0).
  const Vec3 pivot_point(1, 1, 0);
  SE3Transform xi;
  xi.rotation = quat_from_axis_angle({0, 0, 1}, 60.0 * M_PI / 180.0);
  xi.translation = pivot_point - xi.rotation * pivot_point;
  const auto joint = extract_joint(xi);
  REQUIRE(joint.has_value());
  CHECK(joint->kind == JointKind::Revolute);
  CHECK(std::abs(joint->axis.dot(Vec3(0, 0, 1))) == doctest::Approx(1.0));
  CHECK((joint->pivot - Vec3(1, 1, 0)).norm() < 1e-9);
  CHECK(joint->magnitude == doctest::Approx(60.0 * M_PI / 180.0));

  // Every point on the axis line is a fixed point.
  for (double t : {-1.0, 0.0, 0.4, 3.0}) {
    const Vec3 on_axis = joint->pivot + t * joint->axis;
    CHECK((xi.apply(on_axis) - on_axis).norm() < 1e-6);
  }

  SE3Transform slide;
  slide.translation = Vec3(0, 0, 0.3);
  const auto prism = extract_joint(slide);
  REQUIRE(prism.has_value());
  CHECK(prism->kind == JointKind::Prismatic);
  CHECK((prism->axis - Vec3(0, 0, 1)).norm() < 1e-12);
  CHECK(prism->magnitude == doctest::Approx(0.3));

  CHECK_FALSE(extract_joint(SE3Transform::identity()).has_value());

  // Representation invariance: composing with identity changes nothing.
  const auto joint2 = extract_joint(xi.compose(SE3Transform::identity()));
  REQUIRE(joint2.has_value());
  CHECK(axis_angle_error(*joint2, *joint) < 1e-9);
  CHECK((joint2->pivot - joint->pivot).norm() < 1e-9);
}

TEST_CASE("match_loss analytic values") {
  OracleSpec spec = small_fridge(109);
  const OraclePair pair = generate_pair(spec);
  MotionProblem problem;
  problem.state_t = &pair.state_t;
  problem.state_t2 = &pair.state_t2;

  // Choose a gaussian visible in view 0 and bind its exact projection.
  const int g = pair.gt.parts[0].members_t.front();
  const Vec2 px = project(pair.state_t2.views[0].camera, pair.state_t.gaussians[g].position);
  std::vector<BoundCorrespondence> corrs = {{-1, g, 0, px}};
  CHECK(match_loss(problem, corrs, Sim3Transform::identity(), {}) == doctest::Approx(0.0));

  corrs[0].pixel = px + Vec2(3.0, 0.0);
  CHECK(match_loss(problem, corrs, Sim3Transform::identity(), {}) ==
        doctest::Approx(9.0).epsilon(1e-9));

  CHECK_THROWS_AS(match_loss(problem, {}, Sim3Transform::identity(), {}), NoCorrespondences);
}

TEST_CASE("motion loss gradients match finite differences") {
  OraclePair pair = generate_pair(small_fridge(113));
  EngineConfig cfg = fast_cfg();
  cfg.distill_steps = 300;
  auto props_t = cluster_state(pair.state_t, cfg);
  auto props_t2 = cluster_state(pair.state_t2, cfg);
  FeatureField field_t(pair.state_t, props_t, cfg, 11);
  field_t.distill(pair.state_t);
  FeatureField field_t2(pair.state_t2, props_t2, cfg, 12);
  field_t2.distill(pair.state_t2);

  MotionProblem problem;
  problem.state_t = &pair.state_t;
  problem.state_t2 = &pair.state_t2;
  problem.field_t = &field_t;
  problem.field_t2 = &field_t2;
  // One articulated pair (the door) assembled from ground truth.
  const auto& door = pair.gt.parts[1];
  PartPair pp;
  pp.gaussians_t = door.members_t;
  pp.gaussians_t2 = door.members_t2;
  // Door proposal ids for the label-space lookup.
  for (const auto& p : props_t) {
    std::vector<int> m = door.members_t;
    std::sort(m.begin(), m.end());
    if (p.level == MaskLevel::Part && p.gaussians == m) pp.proposal_t = p.id;
  }
  for (const auto& p : props_t2) {
    std::vector<int> m = door.members_t2;
    std::sort(m.begin(), m.end());
    if (p.level == MaskLevel::Part && p.gaussians == m) {
      pp.proposal_t2 = p.id;
      pp.masks_t2 = p.mask_indices;
    }
  }
  REQUIRE(pp.proposal_t >= 0);
  REQUIRE(pp.proposal_t2 >= 0);
  problem.parts.push_back(pp);
  problem.xi_g_init = Sim3Transform::identity();

  // Evaluate away from the optimum so gradients are informative.
  Sim3Transform xi_g;
  xi_g.scale = 1.02;
  xi_g.rotation = quat_from_axis_angle({0.2, 0.3, 0.93}, 0.03);
  xi_g.translation = Vec3(0.01, -0.02, 0.015);
  std::vector<SE3Transform> xi_parts(1);
  xi_parts[0].rotation = quat_from_axis_angle({0, 0, 1}, 0.4);
  xi_parts[0].translation = Vec3(0.02, 0.05, -0.01);

  const auto ctx = make_loss_context(problem, cfg, xi_g, xi_parts, 2024);
  const SolveEvaluation ev = evaluate_motion_loss(*ctx, 0, xi_g, xi_parts, true);
  REQUIRE(std::isfinite(ev.total));
  REQUIRE(ev.match > 0.0);

  // Finite differences in the tangent space.
  const double h = 1e-6;
  Eigen::VectorXd fd(ev.grad.size());
  for (Eigen::Index k = 0; k < ev.grad.size(); ++k) {
    const auto eval_at = [&](double delta) {
      Sim3Transform g = xi_g;
      std::vector<SE3Transform> parts = xi_parts;
      Eigen::VectorXd d = Eigen::VectorXd::Zero(ev.grad.size());
      d[k] = delta;
      const Sim3Transform inc_g{std::exp(d[0]),
                                quat_from_axis_angle(d.segment<3>(1), d.segment<3>(1).norm()),
                                d.segment<3>(4)};
      g = inc_g.compose(g);
      const Vec3 w = d.segment<3>(7);
      const SE3Transform inc{quat_from_axis_angle(w, w.norm()), d.segment<3>(10)};
      parts[0] = inc.compose(parts[0]);
      return evaluate_motion_loss(*ctx, 0, g, parts, false).total;
    };
    fd[k] = (eval_at(h) - eval_at(-h)) / (2 * h);
  }
  const double err = (ev.grad - fd).norm() / std::max(ev.grad.norm(), fd.norm());
  CHECK(err < 1e-4);
}

TEST_CASE("mask feature loss prefers the ground-truth transform") {
  // Full-density scene: the mask term's minimum is carved by coverage, which
  // needs the part sampled densely relative to the splat radius.
  OracleSpec spec127 = oracle_preset("fridge", 127);
  spec127.image_size = 160;
  OraclePair pair = generate_pair(spec127);
  EngineConfig cfg = fast_cfg();
  cfg.distill_steps = 1200;
  auto props_t = cluster_state(pair.state_t, cfg);
  auto props_t2 = cluster_state(pair.state_t2, cfg);
  FeatureField field_t(pair.state_t, props_t, cfg, 21);
  field_t.distill(pair.state_t);
  FeatureField field_t2(pair.state_t2, props_t2, cfg, 22);
  field_t2.distill(pair.state_t2);

  MotionProblem problem;
  problem.state_t = &pair.state_t;
  problem.state_t2 = &pair.state_t2;
  problem.field_t = &field_t;
  problem.field_t2 = &field_t2;
  const auto& door = pair.gt.parts[1];
  PartPair pp;
  pp.gaussians_t = door.members_t;
  pp.gaussians_t2 = door.members_t2;
  for (const auto& p : props_t2) {
    std::vector<int> m = door.members_t2;
    std::sort(m.begin(), m.end());
    if (p.level == MaskLevel::Part && p.gaussians == m) pp.masks_t2 = p.mask_indices;
  }
  REQUIRE(!pp.masks_t2.empty());
  problem.parts.push_back(pp);

  const SE3Transform gt_xi = door.xi_o;
  const double at_gt = mask_feature_loss(problem, 0, pair.gt.xi_g, gt_xi, cfg);
  RandomStream rng(129);
  int wins = 0;
  const int trials = 100;
  for (int i = 0; i < trials; ++i) {
    SE3Transform perturbed = gt_xi;
    perturbed.rotation = canonicalized(
        quat_from_axis_angle(rng.unit_vector(), 5.0 * M_PI / 180.0) * gt_xi.rotation);
    const double loss = mask_feature_loss(problem, 0, pair.gt.xi_g, perturbed, cfg);
    if (loss > at_gt) ++wins;
  }
  CHECK(wins == trials);
}

TEST_CASE("small pipeline run recovers the fridge door and is deterministic") {
  EngineConfig cfg = fast_cfg();
  cfg.seed = 5;
  const OracleSpec spec = small_fridge(5);
  PipelineResult a = run_pipeline(generate_pair(spec), cfg);
  REQUIRE(!a.rows.empty());
  bool found = false;
  for (const auto& row : a.rows) {
    if (row.part != "fridge_door") continue;
    found = true;
    CHECK(row.kind_ok);
    CHECK(row.axis_ang_deg < 0.5);
    CHECK(row.part_motion < 0.5);
  }
  CHECK(found);

  PipelineResult b = run_pipeline(generate_pair(spec), cfg);
  CHECK(metrics_csv(a.rows, cfg, cfg.seed) == metrics_csv(b.rows, cfg, cfg.seed));
  CHECK(a.solution.trace.size() == b.solution.trace.size());
  for (std::size_t i = 0; i < a.solution.trace.size(); ++i)
    CHECK(a.solution.trace[i].total == b.solution.trace[i].total);
}
