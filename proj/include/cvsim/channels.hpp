#pragma once

#include <vector>

#include "cvsim/gaussian_state.hpp"

namespace cvsim {

/// Gaussian CP map: mean -> X mean + d, cov -> X cov X^T + Y.
struct GaussianChannel {
  Matrix x;
  Matrix y;
  Vector d;
  std::vector<int> modes;

  int n_modes() const noexcept { return static_cast<int>(modes.size()); }
};

struct CpReport {
  bool is_cp = false;
  /// Smallest eigenvalue of Y + i Omega - i X Omega X^T.
  double min_eigenvalue = 0.0;
};

CpReport is_cp(const GaussianChannel& ch);

GaussianChannel identity_channel(std::vector<int> modes);
/// Throws InvalidArgument if `y` is not a symmetric PSD matrix.
GaussianChannel make_channel(Matrix x, Matrix y, Vector d, std::vector<int> modes);

/// Pure loss with transmissivity eta in [0, 1].
GaussianChannel make_loss(double eta, int mode = 0);
/// Quantum-limited phase-insensitive amplifier, gain >= 1.
GaussianChannel make_amplifier(double gain, int mode = 0);
/// x = diag(g, 1/g) with extra_noise * I added above the CP noise floor.
GaussianChannel make_phase_sensitive_amp(double g, double extra_noise = 0.0, int mode = 0);
/// x = I, y = noise_cov (2x2, symmetric PSD).
GaussianChannel make_additive_noise(const Matrix& noise_cov, int mode = 0);

/// Smallest added noise making a one-mode map with the given X completely
/// positive: |1 - det X| * I.
Matrix minimal_noise(const Matrix& x);

/// Throws InvalidOperator if the channel is not CP.
GaussianState apply_channel(GaussianState state, const GaussianChannel& ch);

/// b first, then a; differing mode lists are embedded into their union.
GaussianChannel compose_channels(const GaussianChannel& a, const GaussianChannel& b);

/// A symplectic op viewed as a channel with y = 0.
GaussianChannel as_channel(const SymplecticOp& op);

}  // namespace cvsim
