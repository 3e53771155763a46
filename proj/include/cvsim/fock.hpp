#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <complex>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "cvsim/gaussian_state.hpp"
#include "cvsim/rng.hpp"

// Brute-force truncated Fock-space simulator. Deliberately naive: dense
// density matrices, exact matrix exponentials of gate generators, Kraus sums
// for channels. It shares only the phase-space conventions with the Gaussian
// engine and exists to check it.
namespace cvsim::fock {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using SparseOp = Eigen::SparseMatrix<Complex>;

/// Largest Hilbert-space dimension accepted.
inline constexpr int kMaxDimension = 20000;
/// Extra levels used when exponentiating generators.
inline constexpr int kGeneratorPadding = 20;

/// Occupation-number basis: every n_j < cutoff and, when set,
/// sum_j n_j <= max_total.
class FockBasis {
 public:
  FockBasis(int n_modes, int cutoff, std::optional<int> max_total = std::nullopt);

  int n_modes() const noexcept { return n_modes_; }
  int cutoff() const noexcept { return cutoff_; }
  std::optional<int> max_total() const noexcept { return max_total_; }
  int dim() const noexcept { return static_cast<int>(states_.size()) / n_modes_; }

  /// Occupations of basis state `index`.
  std::span<const int> occupation(int index) const {
    return {states_.data() + static_cast<std::size_t>(index) * n_modes_,
            static_cast<std::size_t>(n_modes_)};
  }
  /// -1 when the occupation lies outside the basis.
  int index_of(std::span<const int> occupation) const;

  /// Same per-mode cutoff and cap without `mode`.
  FockBasis without_mode(int mode) const;
  /// Basis enlarged by `extra` levels per mode and on the cap.
  FockBasis padded(int extra) const;

  bool operator==(const FockBasis& other) const {
    return n_modes_ == other.n_modes_ && cutoff_ == other.cutoff_ &&
           max_total_ == other.max_total_;
  }

 private:
  FockBasis(int n_modes, int cutoff, std::optional<int> max_total, bool unchecked);
  void enumerate();

  int n_modes_;
  int cutoff_;
  std::optional<int> max_total_;
  std::vector<int> states_;
  std::vector<int> lookup_;  // mixed-radix occupation -> index or -1
};

struct LadderOperators {
  FockBasis basis;
  /// Annihilation operator per mode; creation is the transpose.
  std::vector<SparseOp> a;
};

LadderOperators build_operators(const FockBasis& basis);
LadderOperators build_operators(int n_modes, int cutoff);

struct FockState {
  FockBasis basis;
  CMatrix rho;
  /// Population discarded by truncation over the history of this state.
  double truncation_loss = 0.0;

  int n_modes() const noexcept { return basis.n_modes(); }
  double trace() const { return rho.trace().real(); }
};

FockState vacuum_state(const FockBasis& basis);
/// Pure number state |n_1, ..., n_N>.
FockState number_state(const FockBasis& basis, std::span<const int> occupation);

struct PhaseShift { int mode; double theta; };
struct Beamsplitter { int mode1; int mode2; double theta; double phi; };
struct Squeeze { int mode; double r; double phi; };
struct TwoModeSqueeze { int mode1; int mode2; double r; };
struct Displace { int mode; double dx; double dp; };
struct Kerr { int mode; double chi; };

using Gate = std::variant<PhaseShift, Beamsplitter, Squeeze, TwoModeSqueeze, Displace, Kerr>;

/// Anti-Hermitian generator G with U = exp(G), built in `basis`.
SparseOp generator(const Gate& gate, const LadderOperators& ops);

/// Truncated unitary: exp of the generator in a padded basis, restricted.
SparseOp gate_unitary(const Gate& gate, const FockBasis& basis);

FockState apply_gate_exact(FockState state, const Gate& gate);

struct Loss { int mode; double eta; };
struct Amplifier { int mode; double gain; };
struct PhaseSensitiveAmp { int mode; double g; double extra_noise; };
struct AdditiveNoise { int mode; Eigen::Matrix2d noise_cov; };

using Channel = std::variant<Loss, Amplifier, PhaseSensitiveAmp, AdditiveNoise>;

/// Loss and amplification as Kraus sums; phase-sensitive amplification as a
/// squeezer plus noise. Additive noise close to isotropic is an isotropic
/// loss and amplifier pair conjugated by a squeezer; strongly anisotropic or
/// rank-deficient noise is a Gaussian dephasing in the eigenbasis of the
/// displacement generator, one principal direction at a time.
FockState apply_channel_exact(FockState state, const Channel& channel);

std::vector<SparseOp> loss_kraus(const FockBasis& basis, int mode, double eta);
std::vector<SparseOp> amplifier_kraus(const FockBasis& basis, int mode, double gain);
FockState apply_kraus(FockState state, std::span<const SparseOp> kraus);

/// Appends a vacuum mode (same cutoff and cap).
FockState add_vacuum_mode(const FockState& state);
FockState partial_trace(const FockState& state, int mode);

/// Quantum-limited amplifier built as a two-mode squeezer with a vacuum
/// ancilla followed by a partial trace. Independent of amplifier_kraus().
FockState amplifier_by_dilation(const FockState& state, int mode, double gain);

/// Fock amplitudes <n|x_theta> for the homodyne eigenstate of
/// x cos(theta) + p sin(theta) at eigenvalue x.
CVector quadrature_eigenstate(int cutoff, double theta, double x);
/// Fock amplitudes of the coherent state with quadrature mean (mx, mp).
CVector coherent_amplitudes(int cutoff, double mx, double mp);
/// Hermite functions psi_n(x), n < count, normalised for x = a + a^dagger.
std::vector<double> hermite_functions(int count, double x);

/// <phi|_mode rho |phi>_mode on the remaining modes, unnormalised. Empty
/// (dimension 0) when `mode` was the only mode; the scalar is returned in
/// `weight` either way.
struct Projection {
  std::optional<FockState> state;
  double weight = 0.0;
};
Projection project_mode(const FockState& state, int mode, const CVector& phi);

/// Reduced single-mode density matrix (cutoff x cutoff).
CMatrix reduced_density(const FockState& state, int mode);

struct ConditionalResult {
  double density_or_prob = 0.0;
  std::optional<FockState> state;
};

std::vector<double> homodyne_density_grid(const FockState& state, int mode, double angle,
                                          double efficiency, std::span<const double> grid);
ConditionalResult homodyne_condition(const FockState& state, int mode, double angle,
                                     double efficiency, double x);
ConditionalResult heterodyne_condition(const FockState& state, int mode, double mx, double mp);

enum class ThresholdBranch { no_absorption, absorption };
ConditionalResult threshold_condition(const FockState& state, std::span<const int> modes,
                                      ThresholdBranch branch);
double vacuum_probability(const FockState& state, std::span<const int> modes);

std::vector<double> photon_number_distribution(const FockState& state, int mode);
ConditionalResult photon_count_condition(const FockState& state, int mode, int n);

double sample_homodyne(const FockState& state, int mode, double angle, double efficiency,
                       RngStream& rng);
Eigen::Vector2d sample_heterodyne(const FockState& state, int mode, RngStream& rng);
int sample_photon_count(const FockState& state, int mode, RngStream& rng);

struct Moments {
  Vector mean;
  Matrix cov;
};

/// Symmetrised first and second quadrature moments, same layout as
/// GaussianState.
Moments moments(const FockState& state);

struct TruncationHealth {
  /// Largest population of the top retained level of any single mode.
  double top_level_population = 0.0;
  /// Population on the outermost total-photon shell (0 without a cap).
  double top_shell_population = 0.0;
  double truncation_loss = 0.0;

  double metric() const {
    return std::max({top_level_population, top_shell_population, truncation_loss});
  }
};

TruncationHealth truncation_health(const FockState& state);

struct ValidityReport {
  double trace = 0.0;
  double hermiticity_residual = 0.0;
  double min_eigenvalue = 0.0;
};

ValidityReport check_state(const FockState& state);

enum class ComparisonStatus { pass, fail, inconclusive };

const char* to_string(ComparisonStatus status);

struct ComparisonReport {
  double max_mean_deviation = 0.0;
  double max_cov_deviation = 0.0;
  TruncationHealth health;
  bool healthy = false;
  ComparisonStatus status = ComparisonStatus::inconclusive;
};

inline constexpr double kDefaultHealthThreshold = 1e-4;

/// Deviations of engine moments from oracle moments. A truncation-unhealthy
/// oracle state makes the comparison inconclusive rather than failed.
ComparisonReport compare(const GaussianState& gauss, const FockState& fock, double tol,
                         double health_threshold = kDefaultHealthThreshold);

}  // namespace cvsim::fock
