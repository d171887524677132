// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include "splatjoint/sh.hpp"

#include <cmath>

namespace splatjoint {

int sh_order_from_count(int count) {
  const int root = static_cast<int>(std::lround(std::sqrt(static_cast<double>(count))));
  if (root * root != count || root < 1) return -1;
  return root - 1;
}

namespace {

// K(l,m) = sqrt((2l+1)/(4 pi) * (l-m)!/(l+m)!), cached for small l.
double sh_norm_uncached(int l, int m) {
  double log_ratio = std::lgamma(l - m + 1.0) - std::lgamma(l + m + 1.0);
  return std::sqrt((2.0 * l + 1.0) / (4.0 * M_PI) * std::exp(log_ratio));
}

constexpr int kNormCacheOrder = 16;

double sh_norm(int l, int m) {
  static const std::vector<double> cache = [] {
    std::vector<double> c;
    for (int ll = 0; ll <= kNormCacheOrder; ++ll)
      for (int mm = 0; mm <= ll; ++mm) c.push_back(sh_norm_uncached(ll, mm));
    return c;
  }();
  if (l > kNormCacheOrder) return sh_norm_uncached(l, m);
  return cache[static_cast<std::size_t>(l) * (l + 1) / 2 + m];
}

// Scaled associated Legendre P_l^m(z) / (1-z^2)^(m/2), Condon-Shortley phase
// included. Polynomial in z, so it stays finite at the poles.
double legendre_scaled(int l, int m, double z) {
  double pmm = 1.0;
  for (int k = 1; k <= m; ++k) pmm *= -(2.0 * k - 1.0);
  if (l == m) return pmm;
  double pmmp1 = z * (2.0 * m + 1.0) * pmm;
  if (l == m + 1) return pmmp1;
  double plm = 0.0;
  for (int ll = m + 2; ll <= l; ++ll) {
    plm = ((2.0 * ll - 1.0) * z * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m);
    pmm = pmmp1;
    pmmp1 = plm;
  }
  return plm;
}

}  // namespace

Eigen::VectorXd sh_basis(int l, const Vec3& dir) {
  const double x = dir.x(), y = dir.y(), z = dir.z();
  Eigen::VectorXd out(2 * l + 1);
  out[l] = sh_norm(l, 0) * legendre_scaled(l, 0, z);
  // A_m + i B_m = (x + i y)^m = rho^m (cos m phi + i sin m phi).
  double am = 1.0, bm = 0.0;
  const double sqrt2 = std::sqrt(2.0);
  for (int m = 1; m <= l; ++m) {
    const double a_next = x * am - y * bm;
    const double b_next = x * bm + y * am;
    am = a_next;
    bm = b_next;
    const double base = sqrt2 * sh_norm(l, m) * legendre_scaled(l, m, z);
    out[l + m] = base * am;
    out[l - m] = base * bm;
  }
  return out;
}

Eigen::VectorXd sh_basis_all(int order, const Vec3& dir) {
  Eigen::VectorXd out(sh_coeff_count(order));
  int offset = 0;
  for (int l = 0; l <= order; ++l) {
    out.segment(offset, 2 * l + 1) = sh_basis(l, dir);
    offset += 2 * l + 1;
  }
  return out;
}

Vec3 sh_evaluate(const std::vector<Eigen::Matrix3Xd>& bands, const Vec3& dir) {
  Vec3 out = Vec3::Zero();
  for (int l = 0; l < static_cast<int>(bands.size()); ++l) {
    if (bands[l].cols() != 2 * l + 1)
      throw DimensionMismatch("band " + std::to_string(l) + " has " +
                              std::to_string(bands[l].cols()) + " coefficients, expected " +
                              std::to_string(2 * l + 1));
    out += bands[l] * sh_basis(l, dir);
  }
  return out;
}

Vec3 sh_evaluate(const Eigen::Matrix3Xd& coeffs, const Vec3& dir) {
  const int order = sh_order_from_count(static_cast<int>(coeffs.cols()));
  if (order < 0)
    throw DimensionMismatch("flat SH block of " + std::to_string(coeffs.cols()) +
                            " columns is not a sum of full bands");
  return coeffs * sh_basis_all(order, dir);
}

}  // namespace splatjoint
