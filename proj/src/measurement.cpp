#include "cvsim/measurement.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numbers>

#include "cvsim/channels.hpp"
#include "cvsim/conventions.hpp"
#include "cvsim/error.hpp"
#include "cvsim/instrumentation.hpp"

namespace cvsim {

const char* to_string(MeasurementKind kind) {
  switch (kind) {
    case MeasurementKind::homodyne: return "homodyne";
    case MeasurementKind::heterodyne: return "heterodyne";
    case MeasurementKind::general_dyne: return "general_dyne";
    case MeasurementKind::vacuum_projection: return "vacuum_projection";
    case MeasurementKind::photon_count: return "photon_count";
  }
  return "unknown";
}

namespace {

// Relative threshold below which eigenvalues count as zero.
constexpr double kRankTol = 1e-12;

struct Partition {
  std::vector<int> kept;
  std::vector<int> idx_a;
  std::vector<int> idx_b;
};

Partition partition(const GaussianState& state, std::span<const int> modes) {
  check_modes(modes, state.n_modes());
  Partition p;
  for (int m = 0; m < state.n_modes(); ++m) {
    if (std::find(modes.begin(), modes.end(), m) == modes.end()) p.kept.push_back(m);
  }
  p.idx_a = quadrature_indices(p.kept);
  p.idx_b = quadrature_indices(modes);
  return p;
}

Matrix rotation(double angle) {
  const double c = std::cos(angle);
  const double s = conventions::rotation_sign * std::sin(angle);
  Matrix r(2, 2);
  r << c, s, -s, c;
  return r;
}

// Conditional moments of the kept block given innovation (m - r_B) and the
// pseudo-inverse `gain_inv` of the measured-block covariance.
std::optional<GaussianState> condition(const GaussianState& state, const Partition& p,
                                       const Matrix& c, const Matrix& gain_inv,
                                       const Vector& innovation) {
  if (p.kept.empty()) return std::nullopt;
  const Matrix& cov = state.cov();
  Matrix va = cov(p.idx_a, p.idx_a) - c * gain_inv * c.transpose();
  Vector ra = state.mean()(p.idx_a) + c * gain_inv * innovation;
  return GaussianState(std::move(ra), 0.5 * (va + va.transpose()));
}

GaussianState lossy(const GaussianState& state, int mode, double efficiency) {
  if (!(efficiency > 0.0 && efficiency <= 1.0)) {
    throw InvalidArgument(
        fmt::format("detector efficiency must lie in (0, 1], got {}", efficiency));
  }
  if (efficiency == 1.0) return state;
  return apply_channel(state, make_loss(efficiency, mode));
}

}  // namespace

Matrix psd_pseudo_inverse(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (m + m.transpose()));
  const Vector& lambda = solver.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() < -conventions::physicality_tol * scale) {
    throw NumericalError(fmt::format(
        "measurement covariance is not positive semidefinite (eigenvalue {:g})",
        lambda.minCoeff()));
  }
  Vector inv = Vector::Zero(lambda.size());
  bool any = false;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) > kRankTol * scale) {
      inv(i) = 1.0 / lambda(i);
      any = true;
    }
  }
  if (!any) throw NumericalError("measurement covariance is singular");
  return solver.eigenvectors() * inv.asDiagonal() * solver.eigenvectors().transpose();
}

Vector sample_outcome(RngStream& rng, const Vector& mean, const Matrix& cov) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw InvalidArgument("sample_outcome: covariance shape does not match mean");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (cov + cov.transpose()));
  const Vector& lambda = solver.eigenvalues();
  const double scale = std::max(1.0, lambda.size() ? lambda.cwiseAbs().maxCoeff() : 0.0);
  if (lambda.size() && lambda.minCoeff() < -conventions::physicality_tol * scale) {
    throw NumericalError("sample_outcome: covariance is not positive semidefinite");
  }
  Vector z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  const Vector root = lambda.cwiseMax(0.0).cwiseSqrt();
  return mean + solver.eigenvectors() * root.asDiagonal() * z;
}

double gaussian_density(const Vector& x, const Vector& mean, const Matrix& cov) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (cov + cov.transpose()));
  const Vector& lambda = solver.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  const Vector y = solver.eigenvectors().transpose() * (x - mean);
  double log_density = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) > kRankTol * scale) {
      log_density -= 0.5 * (y(i) * y(i) / lambda(i) + std::log(2.0 * std::numbers::pi * lambda(i)));
    }
  }
  return std::exp(log_density);
}

std::optional<GaussianState> remove_modes(const GaussianState& state,
                                          std::span<const int> modes) {
  const Partition p = partition(state, modes);
  if (p.kept.empty()) return std::nullopt;
  return state.reduced(p.kept);
}

MeasurementResult general_dyne(const GaussianState& state, std::span<const int> modes,
                               const Matrix& meas_cov, OutcomeSource source) {
  const Partition p = partition(state, modes);
  const auto nb = static_cast<Eigen::Index>(p.idx_b.size());
  if (nb == 0) throw WiringError("general_dyne: no modes to measure");
  if (meas_cov.rows() != nb || meas_cov.cols() != nb) {
    throw InvalidArgument("general_dyne: measurement covariance shape does not match modes");
  }
  instrumentation::note_evolution();

  const Matrix& cov = state.cov();
  const Vector rb = state.mean()(p.idx_b);
  const Matrix m = cov(p.idx_b, p.idx_b) + meas_cov;
  const Matrix m_inv = psd_pseudo_inverse(m);

  Vector outcome;
  if (source.is_forced()) {
    outcome = source.forced_value();
    if (outcome.size() != nb) {
      throw InvalidArgument(fmt::format("forced outcome has length {}, expected {}",
                                        outcome.size(), nb));
    }
  } else {
    outcome = sample_outcome(source.rng(), rb, m);
  }

  MeasurementResult result;
  result.record.kind = MeasurementKind::general_dyne;
  result.record.modes.assign(modes.begin(), modes.end());
  result.record.outcome = outcome;
  result.record.density_or_prob = gaussian_density(outcome, rb, m);
  const Matrix c = cov(p.idx_a, p.idx_b);
  result.state = condition(state, p, c, m_inv, outcome - rb);
  return result;
}

MeasurementResult heterodyne(const GaussianState& state, int mode, OutcomeSource source) {
  const int modes[] = {mode};
  MeasurementResult result =
      general_dyne(state, modes,
                   conventions::vacuum_variance * Matrix::Identity(2, 2), std::move(source));
  result.record.kind = MeasurementKind::heterodyne;
  return result;
}

MeasurementResult homodyne(const GaussianState& input, int mode, double angle, double efficiency,
                           OutcomeSource source) {
  if (!std::isfinite(angle)) throw InvalidArgument("homodyne angle must be finite");
  const int modes[] = {mode};
  check_modes(modes, input.n_modes());
  const GaussianState state = lossy(input, mode, efficiency);
  const Partition p = partition(state, modes);
  instrumentation::note_evolution();

  // Rotate the measured mode so the measured quadrature is its x component.
  const Matrix rot = rotation(angle);
  const Matrix& cov = state.cov();
  const Matrix vb = rot * cov(p.idx_b, p.idx_b) * rot.transpose();
  const Vector rb = rot * state.mean()(p.idx_b);
  const Matrix c = cov(p.idx_a, p.idx_b) * rot.transpose();

  Matrix projector = Matrix::Zero(2, 2);
  projector(0, 0) = 1.0;
  const Matrix projected = projector * vb * projector;
  const Matrix gain_inv = psd_pseudo_inverse(projected);

  const double variance = vb(0, 0);
  double x = 0.0;
  if (source.is_forced()) {
    if (source.forced_value().size() != 1) {
      throw InvalidArgument("homodyne forced outcome must be a scalar");
    }
    x = source.forced_value()(0);
  } else {
    x = rb(0) + std::sqrt(variance) * source.rng().normal();
  }

  MeasurementResult result;
  result.record.kind = MeasurementKind::homodyne;
  result.record.modes = {mode};
  result.record.outcome = Vector::Constant(1, x);
  const double z = (x - rb(0)) / std::sqrt(variance);
  result.record.density_or_prob =
      std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi * variance);

  Vector innovation(2);
  innovation << x - rb(0), 0.0;
  result.state = condition(state, p, c, gain_inv, innovation);
  return result;
}

MeasurementResult homodyne_as_limit(const GaussianState& input, int mode, double angle,
                                    double efficiency, OutcomeSource source, double eps) {
  const int modes[] = {mode};
  check_modes(modes, input.n_modes());
  const GaussianState state = lossy(input, mode, efficiency);

  const Matrix rot = rotation(angle);
  Matrix squeezed = Matrix::Zero(2, 2);
  squeezed(0, 0) = eps;
  squeezed(1, 1) = 1.0 / eps;
  const Matrix meas_cov = rot.transpose() * squeezed * rot;

  const Vector rb = rot * state.mean()(quadrature_indices(modes));
  const double variance =
      (rot * state.cov()(quadrature_indices(modes), quadrature_indices(modes)) *
       rot.transpose())(0, 0) + eps;
  double x = 0.0;
  if (source.is_forced()) {
    if (source.forced_value().size() != 1) {
      throw InvalidArgument("homodyne forced outcome must be a scalar");
    }
    x = source.forced_value()(0);
  } else {
    x = rb(0) + std::sqrt(variance) * source.rng().normal();
  }
  // The anti-squeezed component carries no information; replay its mean.
  Vector rotated_outcome(2);
  rotated_outcome << x, rb(1);

  MeasurementResult result = general_dyne(state, modes, meas_cov,
                                          OutcomeSource::forced(rot.transpose() * rotated_outcome));
  result.record.kind = MeasurementKind::homodyne;
  result.record.outcome = Vector::Constant(1, x);
  const double z = (x - rb(0)) / std::sqrt(variance);
  result.record.density_or_prob =
      std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi * variance);
  return result;
}

double homodyne_density(const GaussianState& input, int mode, double angle, double efficiency,
                        double x) {
  const int modes[] = {mode};
  check_modes(modes, input.n_modes());
  const GaussianState state = lossy(input, mode, efficiency);
  const auto idx = quadrature_indices(modes);
  const Matrix rot = rotation(angle);
  const double mean = (rot * state.mean()(idx))(0);
  const double variance = (rot * state.cov()(idx, idx) * rot.transpose())(0, 0);
  const double z = (x - mean) / std::sqrt(variance);
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi * variance);
}

double vacuum_projection_probability(const GaussianState& state, std::span<const int> modes) {
  check_modes(modes, state.n_modes());
  const auto idx = quadrature_indices(modes);
  const auto n = static_cast<Eigen::Index>(idx.size());
  const Matrix m =
      state.cov()(idx, idx) + conventions::vacuum_variance * Matrix::Identity(n, n);
  const Vector r = state.mean()(idx);
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("vacuum projection: V_B + I is not positive definite");
  }
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double quad = r.dot(llt.solve(r));
  const double k = static_cast<double>(modes.size());
  return std::exp(k * std::log(2.0) - 0.5 * log_det - 0.5 * quad);
}

MeasurementResult condition_on_no_absorption(const GaussianState& state,
                                             std::span<const int> modes) {
  const auto n = static_cast<Eigen::Index>(2 * modes.size());
  const double probability = vacuum_projection_probability(state, modes);
  MeasurementResult result =
      general_dyne(state, modes, conventions::vacuum_variance * Matrix::Identity(n, n),
                   OutcomeSource::forced(Vector::Zero(n)));
  result.record.kind = MeasurementKind::vacuum_projection;
  result.record.outcome = Vector();
  result.record.no_absorption = true;
  result.record.density_or_prob = probability;
  return result;
}

}  // namespace cvsim
