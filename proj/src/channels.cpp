#include "cvsim/channels.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <fmt/format.h>

#include "cvsim/conventions.hpp"
#include "cvsim/error.hpp"
#include "cvsim/instrumentation.hpp"

namespace cvsim {

namespace {

double min_symmetric_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (m + m.transpose()),
                                               Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

void check_noise_matrix(const Matrix& y, const char* what) {
  if (y.rows() != y.cols()) throw InvalidArgument(fmt::format("{}: noise matrix not square", what));
  if (!y.allFinite()) throw InvalidArgument(fmt::format("{}: noise matrix not finite", what));
  const double asym = (y - y.transpose()).cwiseAbs().maxCoeff();
  if (asym > conventions::exact_tol) {
    throw InvalidArgument(fmt::format("{}: noise matrix asymmetric by {:g}", what, asym));
  }
  if (y.size() > 0 && min_symmetric_eigenvalue(y) < -conventions::psd_tol) {
    throw InvalidArgument(fmt::format("{}: noise matrix is not positive semidefinite", what));
  }
}

}  // namespace

CpReport is_cp(const GaussianChannel& ch) {
  const auto k = ch.n_modes();
  if (ch.x.rows() != 2 * k || ch.x.cols() != 2 * k || ch.y.rows() != 2 * k ||
      ch.y.cols() != 2 * k) {
    return {false, -std::numeric_limits<double>::infinity()};
  }
  const Matrix omega = symplectic_form(k);
  const std::complex<double> i(0.0, 1.0);
  Eigen::MatrixXcd h = (0.5 * (ch.y + ch.y.transpose())).cast<std::complex<double>>();
  h += i * (omega - ch.x * omega * ch.x.transpose()).cast<std::complex<double>>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h, Eigen::EigenvaluesOnly);
  const double min_eig = solver.eigenvalues().minCoeff();
  return {min_eig >= -conventions::physicality_tol, min_eig};
}

GaussianChannel identity_channel(std::vector<int> modes) {
  const auto n = static_cast<Eigen::Index>(2 * modes.size());
  return {Matrix::Identity(n, n), Matrix::Zero(n, n), Vector::Zero(n), std::move(modes)};
}

GaussianChannel make_channel(Matrix x, Matrix y, Vector d, std::vector<int> modes) {
  const auto n = static_cast<Eigen::Index>(2 * modes.size());
  if (x.rows() != n || x.cols() != n || y.rows() != n || d.size() != n) {
    throw InvalidArgument("channel matrices do not match the mode list");
  }
  check_noise_matrix(y, "make_channel");
  return {std::move(x), std::move(y), std::move(d), std::move(modes)};
}

GaussianChannel make_loss(double eta, int mode) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw InvalidArgument(fmt::format(
        "loss transmissivity must lie in [0, 1], got {} (use an amplifier for gain)", eta));
  }
  const Matrix id = Matrix::Identity(2, 2);
  return {std::sqrt(eta) * id, (1.0 - eta) * conventions::vacuum_variance * id,
          Vector::Zero(2), {mode}};
}

GaussianChannel make_amplifier(double gain, int mode) {
  if (!(gain >= 1.0) || !std::isfinite(gain)) {
    throw InvalidArgument(fmt::format("amplifier gain must be >= 1, got {}", gain));
  }
  const Matrix id = Matrix::Identity(2, 2);
  return {std::sqrt(gain) * id, (gain - 1.0) * conventions::vacuum_variance * id,
          Vector::Zero(2), {mode}};
}

Matrix minimal_noise(const Matrix& x) {
  return std::abs(1.0 - x.determinant()) * conventions::vacuum_variance *
         Matrix::Identity(2, 2);
}

GaussianChannel make_phase_sensitive_amp(double g, double extra_noise, int mode) {
  if (!(g > 0.0) || !std::isfinite(g)) {
    throw InvalidArgument(fmt::format("phase-sensitive gain must be > 0, got {}", g));
  }
  if (!(extra_noise >= 0.0) || !std::isfinite(extra_noise)) {
    throw InvalidArgument(fmt::format("extra noise must be >= 0, got {}", extra_noise));
  }
  Matrix x = Matrix::Zero(2, 2);
  x(0, 0) = g;
  x(1, 1) = 1.0 / g;
  Matrix y = extra_noise * Matrix::Identity(2, 2) + minimal_noise(x);
  GaussianChannel ch{x, y, Vector::Zero(2), {mode}};
  if (!is_cp(ch).is_cp) {
    throw InvalidArgument("phase-sensitive amplifier parameters violate complete positivity");
  }
  return ch;
}

GaussianChannel make_additive_noise(const Matrix& noise_cov, int mode) {
  if (noise_cov.rows() != 2 || noise_cov.cols() != 2) {
    throw InvalidArgument("additive noise covariance must be 2x2");
  }
  check_noise_matrix(noise_cov, "make_additive_noise");
  return {Matrix::Identity(2, 2), noise_cov, Vector::Zero(2), {mode}};
}

GaussianState apply_channel(GaussianState state, const GaussianChannel& ch) {
  const auto k = static_cast<Eigen::Index>(ch.modes.size());
  if (k == 0 || ch.x.rows() != 2 * k || ch.x.cols() != 2 * k || ch.y.rows() != 2 * k ||
      ch.y.cols() != 2 * k || ch.d.size() != 2 * k) {
    throw InvalidOperator("channel dimensions do not match its mode list");
  }
  check_modes(ch.modes, state.n_modes());
  const CpReport cp = is_cp(ch);
  if (!cp.is_cp) {
    throw InvalidOperator(fmt::format(
        "channel is not completely positive (min eigenvalue {:g})", cp.min_eigenvalue));
  }
  instrumentation::note_evolution();

  const auto idx = quadrature_indices(ch.modes);
  Vector local = state.mean_(idx);
  state.mean_(idx) = ch.x * local + ch.d;

  Matrix rows = ch.x * state.cov_(idx, Eigen::all);
  state.cov_(idx, Eigen::all) = rows;
  Matrix cols = state.cov_(Eigen::all, idx) * ch.x.transpose();
  state.cov_(Eigen::all, idx) = cols;
  Matrix block = state.cov_(idx, idx) + ch.y;
  state.cov_(idx, idx) = 0.5 * (block + block.transpose());
  return state;
}

GaussianChannel compose_channels(const GaussianChannel& a, const GaussianChannel& b) {
  std::vector<int> modes = a.modes;
  for (int m : b.modes) {
    if (std::find(modes.begin(), modes.end(), m) == modes.end()) modes.push_back(m);
  }
  const int max_mode = modes.empty() ? 0 : *std::max_element(modes.begin(), modes.end());
  check_modes(a.modes, max_mode + 1);
  check_modes(b.modes, max_mode + 1);
  if (a.x.rows() != 2 * a.n_modes() || b.x.rows() != 2 * b.n_modes()) {
    throw WiringError("channel dimensions do not match mode lists");
  }

  auto embed = [&](const GaussianChannel& ch) {
    std::vector<int> pos;
    for (int m : ch.modes) {
      pos.push_back(static_cast<int>(std::find(modes.begin(), modes.end(), m) - modes.begin()));
    }
    const auto idx = quadrature_indices(pos);
    GaussianChannel e = identity_channel(modes);
    e.x(idx, idx) = ch.x;
    e.y(idx, idx) = ch.y;
    e.d(idx) = ch.d;
    return e;
  };
  const GaussianChannel ea = embed(a);
  const GaussianChannel eb = embed(b);
  Matrix y = ea.x * eb.y * ea.x.transpose() + ea.y;
  return {ea.x * eb.x, 0.5 * (y + y.transpose()), ea.x * eb.d + ea.d, modes};
}

GaussianChannel as_channel(const SymplecticOp& op) {
  const auto n = op.s.rows();
  return {op.s, Matrix::Zero(n, n), op.d, op.modes};
}

}  // namespace cvsim
