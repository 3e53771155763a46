#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cvsim/gaussian_state.hpp"
#include "cvsim/rng.hpp"

namespace cvsim {

enum class MeasurementKind { homodyne, heterodyne, general_dyne, vacuum_projection, photon_count };

const char* to_string(MeasurementKind kind);

struct MeasurementSpec {
  MeasurementKind kind = MeasurementKind::homodyne;
  std::vector<int> modes;
  double angle = 0.0;
  double efficiency = 1.0;
  Matrix meas_cov;
  std::optional<Vector> forced_outcome;
};

struct MeasurementRecord {
  std::string label;
  MeasurementKind kind = MeasurementKind::homodyne;
  std::vector<int> modes;
  /// Quadrature outcome; empty for vacuum projection.
  Vector outcome;
  bool no_absorption = false;
  /// Probability density at the outcome, or the branch probability for
  /// vacuum projection.
  double density_or_prob = 0.0;
};

/// Measured modes are removed; `state` is empty when nothing remains.
struct MeasurementResult {
  MeasurementRecord record;
  std::optional<GaussianState> state;
};

/// Either draws outcomes from a caller-owned stream or replays a fixed value.
class OutcomeSource {
 public:
  static OutcomeSource sampled(RngStream& rng) { return OutcomeSource(&rng, std::nullopt); }
  static OutcomeSource forced(Vector outcome) { return OutcomeSource(nullptr, std::move(outcome)); }

  bool is_forced() const noexcept { return forced_.has_value(); }
  const Vector& forced_value() const { return *forced_; }
  RngStream& rng() const { return *rng_; }

 private:
  OutcomeSource(RngStream* rng, std::optional<Vector> forced)
      : rng_(rng), forced_(std::move(forced)) {}

  RngStream* rng_;
  std::optional<Vector> forced_;
};

/// Multivariate normal draw through a symmetric square root of `cov`.
Vector sample_outcome(RngStream& rng, const Vector& mean, const Matrix& cov);

/// Normal density; for singular `cov` the density on its support.
double gaussian_density(const Vector& x, const Vector& mean, const Matrix& cov);

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix. Throws
/// NumericalError if the matrix has a significantly negative eigenvalue or is
/// entirely zero.
Matrix psd_pseudo_inverse(const Matrix& m);

/// Everything except the listed modes; empty when all modes are listed.
std::optional<GaussianState> remove_modes(const GaussianState& state, std::span<const int> modes);

/// General-dyne measurement with measurement-noise covariance `meas_cov`:
/// outcome ~ N(r_B, V_B + meas_cov), then a Schur-complement update of the
/// remaining modes.
MeasurementResult general_dyne(const GaussianState& state, std::span<const int> modes,
                               const Matrix& meas_cov, OutcomeSource source);

/// Coherent-state (heterodyne) measurement of one mode: general-dyne with
/// meas_cov = I.
MeasurementResult heterodyne(const GaussianState& state, int mode, OutcomeSource source);

/// Homodyne of x cos(angle) + p sin(angle). Finite efficiency is a loss
/// channel on the measured mode ahead of an ideal detector. The update uses
/// the pseudo-inverse of the projected measured block.
MeasurementResult homodyne(const GaussianState& state, int mode, double angle, double efficiency,
                           OutcomeSource source);

/// Same measurement built as the limit of a general-dyne with
/// meas_cov = R^T diag(eps, 1/eps) R. Used to cross-check homodyne().
MeasurementResult homodyne_as_limit(const GaussianState& state, int mode, double angle,
                                    double efficiency, OutcomeSource source, double eps = 1e-8);

/// Outcome density of homodyne() at `x`.
double homodyne_density(const GaussianState& state, int mode, double angle, double efficiency,
                        double x);

/// Overlap of the reduced state with the vacuum on the listed modes.
double vacuum_projection_probability(const GaussianState& state, std::span<const int> modes);

/// Follow the no-absorption branch of threshold detection on `modes`.
MeasurementResult condition_on_no_absorption(const GaussianState& state,
                                             std::span<const int> modes);

}  // namespace cvsim
