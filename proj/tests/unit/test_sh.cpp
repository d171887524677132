// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include <doctest.h>

#include "splatjoint/sh.hpp"

using namespace splatjoint;

namespace {

// Independent oracle: explicit real SH polynomials for bands 0..3 in the
// layout used by common Gaussian-splatting exports.
Eigen::VectorXd reference_basis(int order, const Vec3& d) {
  const double x = d.x(), y = d.y(), z = d.z();
  const double xx = x * x, yy = y * y, zz = z * z;
  Eigen::VectorXd b(sh_coeff_count(order));
  b[0] = 0.28209479177387814;
  if (order >= 1) {
    b[1] = -0.4886025119029199 * y;
    b[2] = 0.4886025119029199 * z;
    b[3] = -0.4886025119029199 * x;
  }
  if (order >= 2) {
    b[4] = 1.0925484305920792 * x * y;
    b[5] = -1.0925484305920792 * y * z;
    b[6] = 0.31539156525252005 * (2.0 * zz - xx - yy);
    b[7] = -1.0925484305920792 * x * z;
    b[8] = 0.5462742152960396 * (xx - yy);
  }
  if (order >= 3) {
    b[9] = -0.5900435899266435 * y * (3.0 * xx - yy);
    b[10] = 2.890611442640554 * x * y * z;
    b[11] = -0.4570457994644658 * y * (4.0 * zz - xx - yy);
    b[12] = 0.3731763325901154 * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    b[13] = -0.4570457994644658 * x * (4.0 * zz - xx - yy);
    b[14] = 1.445305721320277 * z * (xx - yy);
    b[15] = -0.5900435899266435 * x * (xx - 3.0 * yy);
  }
  return b;
}

}  // namespace

TEST_CASE("sh basis matches the explicit polynomial forms for orders 0..3") {
  RandomStream rng(21);
  for (int i = 0; i < 200; ++i) {
    const Vec3 d = rng.unit_vector();
    const Eigen::VectorXd got = sh_basis_all(3, d);
    const Eigen::VectorXd want = reference_basis(3, d);
    CHECK((got - want).norm() < 1e-12);
  }
  // Poles are the recurrence edge case.
  for (const Vec3& d : {Vec3(0, 0, 1), Vec3(0, 0, -1)}) {
    CHECK((sh_basis_all(3, d) - reference_basis(3, d)).norm() < 1e-12);
  }
}

TEST_CASE("order-0 evaluation is the Y00 constant") {
  std::vector<Eigen::Matrix3Xd> bands(1);
  bands[0].resize(3, 1);
  bands[0] << 1.0, 2.0, -3.0;
  RandomStream rng(22);
  for (int i = 0; i < 10; ++i) {
    const Vec3 c = sh_evaluate(bands, rng.unit_vector());
    CHECK(c.x() == doctest::Approx(0.28209479177).epsilon(1e-9));
    CHECK(c.y() == doctest::Approx(2 * 0.28209479177).epsilon(1e-9));
    CHECK(c.z() == doctest::Approx(-3 * 0.28209479177).epsilon(1e-9));
  }
}

TEST_CASE("all-zero coefficients evaluate to black") {
  Eigen::Matrix3Xd coeffs = Eigen::Matrix3Xd::Zero(3, 16);
  CHECK(sh_evaluate(coeffs, Vec3(0.3, -0.5, 0.81).normalized()).norm() == 0.0);
}

TEST_CASE("order-1 evaluation matches the direct basis formula") {
  RandomStream rng(23);
  std::vector<Eigen::Matrix3Xd> bands(2);
  bands[0].resize(3, 1);
  bands[1].resize(3, 3);
  for (int trial = 0; trial < 20; ++trial) {
    for (auto& b : bands)
      for (Eigen::Index j = 0; j < b.cols(); ++j)
        for (int r = 0; r < 3; ++r) b(r, j) = rng.normal();
    const Vec3 d(0, 0, 1);
    const Eigen::VectorXd basis = reference_basis(1, d);
    Vec3 want = Vec3::Zero();
    for (int r = 0; r < 3; ++r)
      want[r] = bands[0](r, 0) * basis[0] + bands[1](r, 0) * basis[1] +
                bands[1](r, 1) * basis[2] + bands[1](r, 2) * basis[3];
    CHECK((sh_evaluate(bands, d) - want).norm() < 1e-12);
  }
}

TEST_CASE("sh_evaluate rejects malformed bands") {
  std::vector<Eigen::Matrix3Xd> bands(2);
  bands[0].resize(3, 1);
  bands[0].setZero();
  bands[1].resize(3, 2);  // band 1 must carry 3 coefficients
  bands[1].setZero();
  CHECK_THROWS_AS(sh_evaluate(bands, Vec3(0, 0, 1)), DimensionMismatch);
  Eigen::Matrix3Xd flat = Eigen::Matrix3Xd::Zero(3, 7);  // not a band sum
  CHECK_THROWS_AS(sh_evaluate(flat, Vec3(0, 0, 1)), DimensionMismatch);
}

TEST_CASE("sh_evaluate is linear in coefficients") {
  RandomStream rng(24);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Matrix3Xd a(3, 16), b(3, 16);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 16; ++c) {
        a(r, c) = rng.normal();
        b(r, c) = rng.normal();
      }
    const double s = rng.uniform(-2.0, 2.0);
    const Vec3 d = rng.unit_vector();
    const Vec3 lhs = sh_evaluate(Eigen::Matrix3Xd(a + s * b), d);
    const Vec3 rhs = sh_evaluate(a, d) + s * sh_evaluate(b, d);
    CHECK((lhs - rhs).norm() < 1e-10);
  }
}
