// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#pragma once

#include <vector>

#include "splatjoint/common.hpp"

namespace splatjoint {

/// Total coefficient count for bands 0..order inclusive: (order+1)^2.
inline int sh_coeff_count(int order) { return (order + 1) * (order + 1); }

/// Band count implied by a flat coefficient block, or -1 if the column count
/// is not a perfect square.
int sh_order_from_count(int count);

/// Real spherical-harmonics basis for band l at unit direction d, ordered
/// m = -l..l. Signs follow the convention used by common Gaussian-splatting
/// exports (Condon-Shortley phase folded into the associated Legendre terms).
Eigen::VectorXd sh_basis(int l, const Vec3& dir);

/// Bands 0..order stacked into one vector of length (order+1)^2.
Eigen::VectorXd sh_basis_all(int order, const Vec3& dir);

/// Evaluates per-order coefficient blocks (each 3 x (2l+1), RGB rows) at a
/// unit direction. Throws DimensionMismatch when band l does not carry
/// exactly 2l+1 columns.
Vec3 sh_evaluate(const std::vector<Eigen::Matrix3Xd>& bands, const Vec3& dir);

/// Same, with all bands packed into one 3 x (order+1)^2 block.
Vec3 sh_evaluate(const Eigen::Matrix3Xd& coeffs, const Vec3& dir);

}  // namespace splatjoint
