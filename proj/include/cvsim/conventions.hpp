#pragma once

// Phase-space conventions shared by the Gaussian engine and the Fock oracle.
//
//   x = a + a^dagger,   p = -i (a - a^dagger),   [x, p] = 2i
//
// so the vacuum has covariance equal to the identity. Quadratures are
// interleaved (x1, p1, x2, p2, ...). A phase shift by theta is the unitary
// exp(-i * rotation_sign * theta * n), which in the Heisenberg picture maps
//   x -> cos(theta) x + rotation_sign * sin(theta) p.

namespace cvsim::conventions {

inline constexpr double vacuum_variance = 1.0;
inline constexpr double rotation_sign = 1.0;

/// Exact algebraic identities (symplecticity, inverse pairs).
inline constexpr double exact_tol = 1e-12;
/// Slack on minimum eigenvalues for physicality and CP checks.
inline constexpr double physicality_tol = 1e-9;
/// PSD slack for noise matrices.
inline constexpr double psd_tol = 1e-10;
/// Engine-vs-oracle moment agreement.
inline constexpr double oracle_tol = 1e-6;

}  // namespace cvsim::conventions
