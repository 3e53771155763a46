#include "cvsim/gaussian_state.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <fmt/format.h>

#include "cvsim/conventions.hpp"
#include "cvsim/error.hpp"
#include "cvsim/instrumentation.hpp"

namespace cvsim {

namespace instrumentation {

namespace {
thread_local std::uint64_t evolution_counter = 0;
}

std::uint64_t evolution_count() noexcept { return evolution_counter; }
void reset_evolution_count() noexcept { evolution_counter = 0; }
void note_evolution() noexcept { ++evolution_counter; }

}  // namespace instrumentation

namespace {

void require_finite(std::initializer_list<double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw InvalidArgument(fmt::format("{}: parameters must be finite", what));
    }
  }
}

}  // namespace

Matrix symplectic_form(int n_modes) {
  Matrix omega = Matrix::Zero(2 * n_modes, 2 * n_modes);
  for (int j = 0; j < n_modes; ++j) {
    omega(2 * j, 2 * j + 1) = 1.0;
    omega(2 * j + 1, 2 * j) = -1.0;
  }
  return omega;
}

void check_modes(std::span<const int> modes, int n_modes) {
  for (std::size_t i = 0; i < modes.size(); ++i) {
    if (modes[i] < 0 || modes[i] >= n_modes) {
      throw WiringError(
          fmt::format("mode {} out of range for a {}-mode state", modes[i], n_modes));
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (modes[j] == modes[i]) {
        throw WiringError(fmt::format("mode {} repeated", modes[i]));
      }
    }
  }
}

std::vector<int> quadrature_indices(std::span<const int> modes) {
  std::vector<int> idx;
  idx.reserve(2 * modes.size());
  for (int m : modes) {
    idx.push_back(2 * m);
    idx.push_back(2 * m + 1);
  }
  return idx;
}

GaussianState::GaussianState(Vector mean, Matrix cov)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
  if (mean_.size() < 2 || mean_.size() % 2 != 0) {
    throw InvalidArgument(fmt::format(
        "mean vector must have positive even length, got {}", mean_.size()));
  }
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size()) {
    throw InvalidArgument("covariance shape does not match mean vector");
  }
  const double asym = (cov_ - cov_.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= conventions::exact_tol)) {
    throw InvalidArgument(fmt::format("covariance asymmetric by {:g}", asym));
  }
}

bool operator==(const GaussianState& a, const GaussianState& b) {
  return a.mean_.size() == b.mean_.size() && a.mean_ == b.mean_ && a.cov_ == b.cov_;
}

GaussianState GaussianState::reduced(std::span<const int> modes) const {
  check_modes(modes, n_modes());
  const auto idx = quadrature_indices(modes);
  return GaussianState(mean_(idx), cov_(idx, idx));
}

double SymplecticOp::symplectic_residual() const {
  const Matrix omega = symplectic_form(n_modes());
  return (s * omega * s.transpose() - omega).cwiseAbs().maxCoeff();
}

GaussianState vacuum(int n_modes) {
  if (n_modes < 1) {
    throw InvalidArgument(fmt::format("vacuum needs at least one mode, got {}", n_modes));
  }
  return GaussianState(Vector::Zero(2 * n_modes),
                       conventions::vacuum_variance * Matrix::Identity(2 * n_modes, 2 * n_modes));
}

GaussianState coherent(int n_modes, int mode, double dx, double dp) {
  return apply_symplectic(vacuum(n_modes), displace(dx, dp, mode));
}

SymplecticOp identity_op(std::vector<int> modes) {
  const auto k = static_cast<Eigen::Index>(modes.size());
  return {Matrix::Identity(2 * k, 2 * k), Vector::Zero(2 * k), std::move(modes)};
}

SymplecticOp phase_shift(double theta, int mode) {
  require_finite({theta}, "phase_shift");
  const double c = std::cos(theta);
  const double s = conventions::rotation_sign * std::sin(theta);
  Matrix m(2, 2);
  m << c, s, -s, c;
  return {m, Vector::Zero(2), {mode}};
}

SymplecticOp beamsplitter(double theta, double phi, int mode1, int mode2) {
  require_finite({theta, phi}, "beamsplitter");
  // a -> cos(t) a - e^{-i phi} sin(t) b,  b -> e^{i phi} sin(t) a + cos(t) b
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double cp = std::cos(phi);
  const double sp = std::sin(phi);
  Matrix m(4, 4);
  m << c, 0, -s * cp, -s * sp,
       0, c, s * sp, -s * cp,
       s * cp, -s * sp, c, 0,
       s * sp, s * cp, 0, c;
  return {m, Vector::Zero(4), {mode1, mode2}};
}

SymplecticOp squeeze(double r, double phi, int mode) {
  require_finite({r, phi}, "squeeze");
  // a -> cosh(r) a - e^{2 i phi} sinh(r) a^dagger
  const double ch = std::cosh(r);
  const double sh = std::sinh(r);
  const double c2 = std::cos(2 * phi);
  const double s2 = std::sin(2 * phi);
  Matrix m(2, 2);
  m << ch - c2 * sh, -s2 * sh,
       -s2 * sh, ch + c2 * sh;
  return {m, Vector::Zero(2), {mode}};
}

SymplecticOp two_mode_squeeze(double r, int mode1, int mode2) {
  require_finite({r}, "two_mode_squeeze");
  // a -> cosh(r) a - sinh(r) b^dagger, and symmetrically for b
  const double ch = std::cosh(r);
  const double sh = std::sinh(r);
  Matrix m(4, 4);
  m << ch, 0, -sh, 0,
       0, ch, 0, sh,
       -sh, 0, ch, 0,
       0, sh, 0, ch;
  return {m, Vector::Zero(4), {mode1, mode2}};
}

SymplecticOp displace(double dx, double dp, int mode) {
  require_finite({dx, dp}, "displace");
  Vector d(2);
  d << dx, dp;
  return {Matrix::Identity(2, 2), d, {mode}};
}

GaussianState apply_symplectic(GaussianState state, const SymplecticOp& op) {
  const auto k = static_cast<Eigen::Index>(op.modes.size());
  if (k == 0 || op.s.rows() != 2 * k || op.s.cols() != 2 * k || op.d.size() != 2 * k) {
    throw InvalidOperator("symplectic op dimensions do not match its mode list");
  }
  check_modes(op.modes, state.n_modes());
  const double residual = op.symplectic_residual();
  if (!(residual <= conventions::exact_tol)) {
    throw InvalidOperator(fmt::format("operator is not symplectic (residual {:g})", residual));
  }
  instrumentation::note_evolution();

  const auto idx = quadrature_indices(op.modes);
  Vector local = state.mean_(idx);
  state.mean_(idx) = op.s * local + op.d;

  Matrix rows = op.s * state.cov_(idx, Eigen::all);
  state.cov_(idx, Eigen::all) = rows;
  Matrix cols = state.cov_(Eigen::all, idx) * op.s.transpose();
  state.cov_(Eigen::all, idx) = cols;
  Matrix block = state.cov_(idx, idx);
  state.cov_(idx, idx) = 0.5 * (block + block.transpose());
  return state;
}

SymplecticOp compose(const SymplecticOp& a, const SymplecticOp& b) {
  std::vector<int> modes = a.modes;
  for (int m : b.modes) {
    if (std::find(modes.begin(), modes.end(), m) == modes.end()) modes.push_back(m);
  }
  const int max_mode = modes.empty() ? 0 : *std::max_element(modes.begin(), modes.end());
  check_modes(a.modes, max_mode + 1);
  check_modes(b.modes, max_mode + 1);
  if (a.s.rows() != 2 * a.n_modes() || b.s.rows() != 2 * b.n_modes()) {
    throw WiringError("operator dimensions do not match mode lists");
  }

  // Embed both into the union, positions given by `modes`.
  auto embed = [&](const SymplecticOp& op) {
    std::vector<int> pos;
    for (int m : op.modes) {
      pos.push_back(static_cast<int>(std::find(modes.begin(), modes.end(), m) - modes.begin()));
    }
    const auto idx = quadrature_indices(pos);
    SymplecticOp e = identity_op(modes);
    e.s(idx, idx) = op.s;
    e.d(idx) = op.d;
    return e;
  };
  const SymplecticOp ea = embed(a);
  const SymplecticOp eb = embed(b);
  return {ea.s * eb.s, ea.s * eb.d + ea.d, modes};
}

PhysicalityReport validate(const GaussianState& state) {
  PhysicalityReport report;
  const Matrix& cov = state.cov();
  report.symmetry_residual = (cov - cov.transpose()).cwiseAbs().maxCoeff();
  const Matrix sym = 0.5 * (cov + cov.transpose());
  Eigen::MatrixXcd h = sym.cast<std::complex<double>>();
  h += std::complex<double>(0.0, 1.0) * symplectic_form(state.n_modes()).cast<std::complex<double>>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h, Eigen::EigenvaluesOnly);
  report.min_eigenvalue = solver.eigenvalues().minCoeff();
  report.valid = report.symmetry_residual <= conventions::exact_tol &&
                 report.min_eigenvalue >= -conventions::physicality_tol;
  return report;
}

}  // namespace cvsim
