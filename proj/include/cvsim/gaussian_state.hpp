#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace cvsim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class GaussianState;
struct SymplecticOp;
struct GaussianChannel;
GaussianState apply_symplectic(GaussianState state, const SymplecticOp& op);
GaussianState apply_channel(GaussianState state, const GaussianChannel& ch);

/// Block-diagonal symplectic form with 2x2 blocks [[0, 1], [-1, 0]].
Matrix symplectic_form(int n_modes);

/// Throws WiringError unless `modes` are distinct and lie in [0, n_modes).
void check_modes(std::span<const int> modes, int n_modes);

/// Quadrature indices (2m, 2m+1) for each listed mode, in order.
std::vector<int> quadrature_indices(std::span<const int> modes);

/// N-mode Gaussian state described by its first and second quadrature moments.
class GaussianState {
 public:
  /// Requires an even dimension >= 2, matching sizes and a covariance
  /// symmetric to within 1e-12. Physicality is not enforced here; see
  /// validate().
  GaussianState(Vector mean, Matrix cov);

  int n_modes() const noexcept { return static_cast<int>(mean_.size() / 2); }
  const Vector& mean() const noexcept { return mean_; }
  const Matrix& cov() const noexcept { return cov_; }

  /// Mean and covariance restricted to the listed modes.
  GaussianState reduced(std::span<const int> modes) const;

  /// Exact (bitwise) equality of both moments.
  friend bool operator==(const GaussianState& a, const GaussianState& b);

 private:
  friend GaussianState apply_symplectic(GaussianState, const SymplecticOp&);
  friend GaussianState apply_channel(GaussianState, const GaussianChannel&);

  Vector mean_;
  Matrix cov_;
};

/// Symplectic matrix plus displacement acting on an ordered set of modes.
struct SymplecticOp {
  Matrix s;
  Vector d;
  std::vector<int> modes;

  int n_modes() const noexcept { return static_cast<int>(modes.size()); }
  /// max |s Omega s^T - Omega|.
  double symplectic_residual() const;
};

GaussianState vacuum(int n_modes);
/// Vacuum with the given mode displaced by (dx, dp).
GaussianState coherent(int n_modes, int mode, double dx, double dp);

SymplecticOp identity_op(std::vector<int> modes);
SymplecticOp phase_shift(double theta, int mode = 0);
SymplecticOp beamsplitter(double theta, double phi, int mode1 = 0, int mode2 = 1);
SymplecticOp squeeze(double r, double phi, int mode = 0);
SymplecticOp two_mode_squeeze(double r, int mode1 = 0, int mode2 = 1);
SymplecticOp displace(double dx, double dp, int mode = 0);

/// mean <- S mean + d, cov <- S cov S^T on the op's modes. Cost is linear in
/// the number of modes of the state for a fixed-size op.
GaussianState apply_symplectic(GaussianState state, const SymplecticOp& op);

/// b first, then a. Ops on different modes are embedded into the union of
/// both mode lists (a's modes first).
SymplecticOp compose(const SymplecticOp& a, const SymplecticOp& b);

struct PhysicalityReport {
  double symmetry_residual = 0.0;
  /// Smallest eigenvalue of cov + i Omega.
  double min_eigenvalue = 0.0;
  bool valid = false;
};

PhysicalityReport validate(const GaussianState& state);

}  // namespace cvsim
