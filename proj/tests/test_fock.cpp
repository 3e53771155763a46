#include <cmath>
#include <numbers>

#include "cvsim/channels.hpp"
#include "cvsim/error.hpp"
#include "cvsim/fock.hpp"
#include "cvsim/measurement.hpp"
#include "random_instances.hpp"
#include "test_util.hpp"

using namespace cvsim;
using namespace cvsim::fock;
using cvsim::testing::distance;
using cvsim::testing::max_abs;

namespace {

double cmax_abs(const CMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

// Coherent probe with an asymmetric mean so that every sign shows up.
FockState probe(int n_modes, int cutoff) {
  FockState s = vacuum_state(FockBasis(n_modes, cutoff));
  s = apply_gate_exact(s, Displace{0, 0.6, -0.4});
  if (n_modes > 1) s = apply_gate_exact(s, Displace{1, -0.3, 0.5});
  return s;
}

GaussianState probe_gauss(int n_modes) {
  GaussianState s = apply_symplectic(vacuum(n_modes), displace(0.6, -0.4, 0));
  if (n_modes > 1) s = apply_symplectic(s, displace(-0.3, 0.5, 1));
  return s;
}

}  // namespace

TEST_SUITE("fock") {

TEST_CASE("ladder operators") {
  const LadderOperators ops = build_operators(1, 2);
  CMatrix a = CMatrix(ops.a[0]);
  CMatrix expected(2, 2);
  expected << 0, 1, 0, 0;
  CHECK(cmax_abs(a - expected) == 0.0);

  // [a, a^dagger] = I apart from the top level, which gets 1 - cutoff.
  const int cutoff = 8;
  const LadderOperators big = build_operators(1, cutoff);
  const CMatrix b = CMatrix(big.a[0]);
  CMatrix comm = b * b.adjoint() - b.adjoint() * b;
  CMatrix want = CMatrix::Identity(cutoff, cutoff);
  want(cutoff - 1, cutoff - 1) = 1.0 - cutoff;
  CHECK(cmax_abs(comm - want) < 1e-12);

  for (int c : {2, 5, 30}) {
    const Moments m = moments(vacuum_state(FockBasis(1, c)));
    CHECK(m.cov(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK_THROWS_AS(FockBasis(4, 5), InvalidArgument);
  CHECK_THROWS_AS(FockBasis(3, 30), InvalidArgument);
  CHECK_THROWS_AS(FockBasis(1, 1), InvalidArgument);
}

TEST_CASE("basis with a photon-number cap") {
  const FockBasis b(3, 10, 4);
  CHECK(b.dim() == 35);
  const int occ[] = {2, 2, 0};
  CHECK(b.index_of(occ) >= 0);
  const int over[] = {2, 2, 1};
  CHECK(b.index_of(over) == -1);
}

TEST_CASE("identity gates") {
  const FockState s = probe(2, 15);
  CHECK(cmax_abs(apply_gate_exact(s, PhaseShift{0, 0.0}).rho - s.rho) < 1e-15);
  CHECK(cmax_abs(apply_gate_exact(s, Kerr{1, 0.0}).rho - s.rho) < 1e-15);
  CHECK(cmax_abs(apply_gate_exact(s, Displace{0, 0.0, 0.0}).rho - s.rho) < 1e-15);
}

TEST_CASE("displaced vacuum population") {
  const FockState s = apply_gate_exact(vacuum_state(FockBasis(1, 25)), Displace{0, 2.0, 0.0});
  CHECK(std::abs(s.rho(0, 0).real() - std::exp(-1.0)) < 1e-10);
  const Moments m = moments(s);
  CHECK(m.mean(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(max_abs(m.cov - Matrix::Identity(2, 2)) < 1e-10);
}

TEST_CASE("number state moments") {
  const int one[] = {1};
  const Moments m = moments(number_state(FockBasis(1, 10), one));
  CHECK(max_abs(m.mean) < 1e-15);
  CHECK(max_abs(m.cov - 3.0 * Matrix::Identity(2, 2)) < 1e-12);
}

// Every generator on a coherent probe, both backends. This fixes all sign
// conventions in the repository.
TEST_CASE("convention lock") {
  const int cutoff = 30;
  const double tol = 1e-8;

  SUBCASE("phase shift") {
    const auto g = apply_symplectic(probe_gauss(1), phase_shift(0.7));
    CHECK(distance(g, moments(apply_gate_exact(probe(1, cutoff), PhaseShift{0, 0.7}))) < tol);
  }
  SUBCASE("squeeze") {
    const auto g = apply_symplectic(probe_gauss(1), squeeze(0.3, 0.4));
    CHECK(distance(g, moments(apply_gate_exact(probe(1, cutoff), Squeeze{0, 0.3, 0.4}))) < tol);
  }
  SUBCASE("displace") {
    const auto g = apply_symplectic(probe_gauss(1), displace(0.2, 0.9));
    CHECK(distance(g, moments(apply_gate_exact(probe(1, cutoff), Displace{0, 0.2, 0.9}))) < tol);
  }
  SUBCASE("beamsplitter") {
    const auto g = apply_symplectic(probe_gauss(2), beamsplitter(0.5, 0.8, 0, 1));
    CHECK(distance(g, moments(apply_gate_exact(probe(2, cutoff), Beamsplitter{0, 1, 0.5, 0.8}))) <
          tol);
    const auto h = apply_symplectic(probe_gauss(2), beamsplitter(0.5, 0.8, 1, 0));
    CHECK(distance(h, moments(apply_gate_exact(probe(2, cutoff), Beamsplitter{1, 0, 0.5, 0.8}))) <
          tol);
  }
  SUBCASE("two-mode squeeze") {
    const auto g = apply_symplectic(probe_gauss(2), two_mode_squeeze(0.3, 0, 1));
    CHECK(distance(g, moments(apply_gate_exact(probe(2, cutoff), TwoModeSqueeze{0, 1, 0.3}))) <
          tol);
  }
  SUBCASE("loss") {
    const auto g = apply_channel(probe_gauss(1), make_loss(0.6));
    CHECK(distance(g, moments(apply_channel_exact(probe(1, cutoff), Loss{0, 0.6}))) < tol);
  }
  SUBCASE("amplifier") {
    const auto g = apply_channel(probe_gauss(1), make_amplifier(1.4));
    CHECK(distance(g, moments(apply_channel_exact(probe(1, cutoff), Amplifier{0, 1.4}))) < tol);
  }
  SUBCASE("phase-sensitive amplifier") {
    const auto g = apply_channel(probe_gauss(1), make_phase_sensitive_amp(1.3, 0.2));
    CHECK(distance(g, moments(apply_channel_exact(probe(1, cutoff), PhaseSensitiveAmp{0, 1.3, 0.2}))) <
          tol);
  }
  SUBCASE("additive noise") {
    Eigen::Matrix2d y;
    y << 0.3, 0.1, 0.1, 0.2;
    const auto g = apply_channel(probe_gauss(1), make_additive_noise(y));
    CHECK(distance(g, moments(apply_channel_exact(probe(1, cutoff), AdditiveNoise{0, y}))) < tol);
  }
  SUBCASE("rank-one and strongly anisotropic noise") {
    Eigen::Matrix2d y;
    y << 0.16, 0.12, 0.12, 0.09;
    const auto g = apply_channel(probe_gauss(1), make_additive_noise(y));
    CHECK(distance(g, moments(apply_channel_exact(probe(1, cutoff), AdditiveNoise{0, y}))) < tol);
    y << 0.4, 0.0, 0.0, 0.004;
    const auto h = apply_channel(probe_gauss(1), make_additive_noise(y));
    CHECK(distance(h, moments(apply_channel_exact(probe(1, cutoff), AdditiveNoise{0, y}))) < tol);
  }
}

TEST_CASE("two independent amplifier constructions agree") {
  const FockState s = probe(1, 30);
  const FockState a = apply_channel_exact(s, Amplifier{0, 1.3});
  const FockState b = amplifier_by_dilation(s, 0, 1.3);
  CHECK(cmax_abs(a.rho - b.rho) < 1e-8);
}

TEST_CASE("loss") {
  const FockState s = probe(1, 20);
  CHECK(cmax_abs(apply_channel_exact(s, Loss{0, 1.0}).rho - s.rho) < 1e-15);

  const int one[] = {1};
  const FockState gone = apply_channel_exact(number_state(FockBasis(1, 5), one), Loss{0, 0.0});
  CHECK(std::abs(gone.rho(0, 0).real() - 1.0) < 1e-15);

  // Loss 0.5 on alpha = 1 is the coherent state alpha = 1/sqrt(2).
  const FockState c = apply_gate_exact(vacuum_state(FockBasis(1, 25)), Displace{0, 2.0, 0.0});
  const FockState out = apply_channel_exact(c, Loss{0, 0.5});
  const CVector target = coherent_amplitudes(25, std::sqrt(2.0), 0.0);
  const double fidelity = (target.adjoint() * out.rho * target)(0, 0).real();
  CHECK(1.0 - fidelity < 1e-8);
}

TEST_CASE("measurements") {
  const FockBasis b(1, 20);
  CHECK(photon_number_distribution(vacuum_state(b), 0)[0] == doctest::Approx(1.0));

  const int m0[] = {0};
  const FockState c = apply_gate_exact(vacuum_state(FockBasis(1, 25)), Displace{0, 2.0, 0.0});
  const ConditionalResult absorbed = threshold_condition(c, m0, ThresholdBranch::absorption);
  CHECK(absorbed.density_or_prob == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-10));
  CHECK(vacuum_probability(c, m0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-10));

  // Hermite functions are orthonormal on the x = a + a^dagger line.
  const int n = 6;
  Matrix gram = Matrix::Zero(n, n);
  const double h = 0.01;
  for (double x = -12.0; x <= 12.0; x += h) {
    const auto psi = hermite_functions(n, x);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) gram(i, j) += h * psi[i] * psi[j];
    }
  }
  CHECK(max_abs(gram - Matrix::Identity(n, n)) < 1e-10);
}

TEST_CASE("moments") {
  CHECK(distance(vacuum(1), moments(vacuum_state(FockBasis(1, 5)))) < 1e-15);
  const FockState c = apply_gate_exact(vacuum_state(FockBasis(1, 25)), Displace{0, 2.0, 0.0});
  CHECK(distance(coherent(1, 0, 2.0, 0.0), moments(c)) < 1e-10);
}

TEST_CASE("compare") {
  const ComparisonReport same = compare(vacuum(1), vacuum_state(FockBasis(1, 10)), 1e-6);
  CHECK(same.max_mean_deviation == 0.0);
  CHECK(same.max_cov_deviation < 1e-15);
  CHECK(same.status == ComparisonStatus::pass);

  const GaussianState sq = apply_symplectic(vacuum(1), squeeze(0.5, 0.0));
  const ComparisonReport good =
      compare(sq, apply_gate_exact(vacuum_state(FockBasis(1, 40)), Squeeze{0, 0.5, 0.0}), 1e-6);
  CHECK(good.status == ComparisonStatus::pass);
  CHECK(good.health.top_level_population < 1e-10);

  const GaussianState strong = apply_symplectic(vacuum(1), squeeze(2.0, 0.0));
  const ComparisonReport bad =
      compare(strong, apply_gate_exact(vacuum_state(FockBasis(1, 10)), Squeeze{0, 2.0, 0.0}), 1e-6);
  CHECK_FALSE(bad.healthy);
  CHECK(bad.status == ComparisonStatus::inconclusive);

  const ComparisonReport wrong =
      compare(coherent(1, 0, 0.1, 0.0), vacuum_state(FockBasis(1, 10)), 1e-6);
  CHECK(wrong.status == ComparisonStatus::fail);
}

TEST_CASE("states stay valid") {
  cvsim::testing::Sampler rng(3);
  FockState s = probe(2, 20);
  for (int i = 0; i < 6; ++i) {
    s = apply_gate_exact(s, Beamsplitter{0, 1, rng.angle(), rng.angle()});
    s = apply_channel_exact(s, Loss{rng.integer(0, 1), rng.uniform(0.5, 1.0)});
  }
  const ValidityReport r = check_state(s);
  CHECK(r.trace == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.hermiticity_residual < 1e-12);
  CHECK(r.min_eigenvalue > -1e-10);
}

}
