// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include <doctest.h>

#include "splatjoint/metrics.hpp"

using namespace splatjoint;

namespace {
JointParams revolute_axis(const Vec3& axis, const Vec3& pivot = Vec3::Zero()) {
  JointParams j;
  j.kind = JointKind::Revolute;
  j.axis = axis.normalized();
  j.pivot = pivot;
  j.magnitude = 1.0;
  return j;
}
}  // namespace

TEST_CASE("axis angle error basics and the undirected convention") {
  CHECK(axis_angle_error(revolute_axis({0, 0, 1}), revolute_axis({0, 0, 1})) ==
        doctest::Approx(0.0));
  CHECK(axis_angle_error(revolute_axis({1, 0, 0}), revolute_axis({0, 1, 0})) ==
        doctest::Approx(90.0));
  CHECK(axis_angle_error(revolute_axis({1, 0, 0}), revolute_axis({-1, 0, 0})) ==
        doctest::Approx(0.0));
  RandomStream rng(31);
  for (int i = 0; i < 50; ++i) {
    const double e =
        axis_angle_error(revolute_axis(rng.unit_vector()), revolute_axis(rng.unit_vector()));
    CHECK(e >= 0.0);
    CHECK(e <= 90.0 + 1e-12);
  }
}

TEST_CASE("axis position error in 0.1 m units") {
  CHECK(axis_pos_error(revolute_axis({0, 0, 1}), revolute_axis({0, 0, 1})) ==
        doctest::Approx(0.0));
  // Parallel z axes offset by 5 cm -> 0.5 units.
  CHECK(axis_pos_error(revolute_axis({0, 0, 1}, {0.05, 0, 0}), revolute_axis({0, 0, 1})) ==
        doctest::Approx(0.5));
  // Skew lines: z axis through origin vs y-direction line through (1,0,0).
  const double skew =
      axis_pos_error(revolute_axis({0, 0, 1}), revolute_axis({0, 1, 0}, {1, 0, 0}));
  CHECK(skew == doctest::Approx(10.0).epsilon(1e-9));
  // Brute-force check of the closed-form skew distance.
  double best = 1e18;
  for (double s = -3; s <= 3; s += 0.001)
    for (double t = -3; t <= 3; t += 0.01) {
      const Vec3 a(0, 0, s);
      const Vec3 b = Vec3(1, 0, 0) + t * Vec3(0, 1, 0);
      best = std::min(best, (a - b).norm());
    }
  CHECK(best == doctest::Approx(skew * 0.1).epsilon(1e-3));

  JointParams prism = revolute_axis({0, 0, 1});
  prism.kind = JointKind::Prismatic;
  CHECK_THROWS_AS(axis_pos_error(prism, revolute_axis({0, 0, 1})), NotRevolute);
}

TEST_CASE("part motion error for both joint kinds") {
  SE3Transform a, b;
  CHECK(part_motion_error(a, b, JointKind::Revolute) == doctest::Approx(0.0));
  a.rotation = quat_from_axis_angle({0, 0, 1}, 30.0 * M_PI / 180.0);
  b.rotation = quat_from_axis_angle({0, 0, 1}, 33.0 * M_PI / 180.0);
  CHECK(part_motion_error(a, b, JointKind::Revolute) == doctest::Approx(3.0).epsilon(1e-9));
  SE3Transform c, d;
  c.translation = Vec3(0, 0, 0.30);
  d.translation = Vec3(0, 0, 0.27);
  CHECK(part_motion_error(c, d, JointKind::Prismatic) == doctest::Approx(0.03).epsilon(1e-9));
}

TEST_CASE("chamfer basics") {
  CHECK(chamfer_l1({{0, 0, 0}, {1, 1, 1}}, {{0, 0, 0}, {1, 1, 1}}) == doctest::Approx(0.0));
  CHECK(chamfer_l1({{0, 0, 0}}, {{0, 0, 1}}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(chamfer_l1({}, {{0, 0, 0}}), EmptySet);
}

TEST_CASE("chamfer matches an O(n^2) brute force on jittered clouds") {
  RandomStream rng(33);
  std::vector<Vec3> a(1000), b(1000);
  for (int i = 0; i < 1000; ++i) {
    a[i] = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    b[i] = a[i] + Vec3(rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01),
                       rng.uniform(-0.01, 0.01));
  }
  const auto directed = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    double sum = 0;
    for (const auto& p : from) {
      double best = 1e18;
      for (const auto& q : to) best = std::min(best, (p - q).norm());
      sum += best;
    }
    return sum / from.size();
  };
  const double brute = 0.5 * (directed(a, b) + directed(b, a));
  CHECK(chamfer_l1(a, b) == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("chamfer is symmetric and rigid-invariant") {
  RandomStream rng(34);
  std::vector<Vec3> a(200), b(150);
  for (auto& p : a) p = Vec3(rng.normal(), rng.normal(), rng.normal());
  for (auto& p : b) p = Vec3(rng.normal(), rng.normal(), rng.normal());
  CHECK(chamfer_l1(a, b) == doctest::Approx(chamfer_l1(b, a)).epsilon(1e-12));
  SE3Transform xf;
  xf.rotation = quat_from_axis_angle(rng.unit_vector(), 1.1);
  xf.translation = Vec3(0.3, -0.2, 0.9);
  std::vector<Vec3> a2(a.size()), b2(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) a2[i] = xf.apply(a[i]);
  for (std::size_t i = 0; i < b.size(); ++i) b2[i] = xf.apply(b[i]);
  CHECK(std::abs(chamfer_l1(a2, b2) - chamfer_l1(a, b)) < 1e-9);
}
