#include <cmath>
#include <numbers>

#include "cvsim/error.hpp"
#include "cvsim/fock.hpp"
#include "cvsim/gaussian_state.hpp"
#include "random_instances.hpp"
#include "test_util.hpp"

using namespace cvsim;
using cvsim::testing::distance;
using cvsim::testing::max_abs;
constexpr double pi = std::numbers::pi;

TEST_SUITE("gaussian_state") {

TEST_CASE("vacuum moments") {
  const GaussianState v = vacuum(2);
  CHECK(max_abs(v.mean()) == 0.0);
  CHECK(v.cov() == Matrix::Identity(4, 4));

  const PhysicalityReport r = validate(vacuum(1));
  CHECK(r.valid);
  CHECK(std::abs(r.min_eigenvalue) < 1e-12);

  const GaussianState big = vacuum(1000);
  CHECK(big.mean().size() == 2000);
  CHECK(big.cov().rows() == 2000);
  CHECK(max_abs(big.mean()) == 0.0);
}

TEST_CASE("construction rejects bad shapes") {
  CHECK_THROWS_AS(vacuum(0), InvalidArgument);
  CHECK_THROWS_AS(GaussianState(Vector::Zero(3), Matrix::Identity(3, 3)), InvalidArgument);
  CHECK_THROWS_AS(GaussianState(Vector::Zero(2), Matrix::Identity(4, 4)), InvalidArgument);
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.1;
  CHECK_THROWS_AS(GaussianState(Vector::Zero(2), asym), InvalidArgument);
}

TEST_CASE("trivial gates are the identity") {
  CHECK(max_abs(phase_shift(0.0).s - Matrix::Identity(2, 2)) == 0.0);
  CHECK(max_abs(phase_shift(2 * pi).s - Matrix::Identity(2, 2)) < 1e-12);
  CHECK(max_abs(beamsplitter(0.0, 0.7).s - Matrix::Identity(4, 4)) == 0.0);
  CHECK(max_abs(squeeze(0.0, 0.3).s - Matrix::Identity(2, 2)) == 0.0);
  CHECK(max_abs(two_mode_squeeze(0.0).s - Matrix::Identity(4, 4)) == 0.0);
  const GaussianState s = cvsim::testing::Sampler(3).state(2, 6);
  CHECK(apply_symplectic(s, displace(0.0, 0.0, 1)) == s);
  CHECK(apply_symplectic(s, identity_op({0, 1})) == s);
}

TEST_CASE("gates are symplectic") {
  cvsim::testing::Sampler rng(11);
  for (int i = 0; i < 50; ++i) {
    CHECK(phase_shift(rng.angle()).symplectic_residual() < 1e-12);
    CHECK(beamsplitter(rng.angle(), rng.angle()).symplectic_residual() < 1e-12);
    CHECK(squeeze(rng.uniform(-2, 2), rng.angle()).symplectic_residual() < 1e-12);
    CHECK(two_mode_squeeze(rng.uniform(-2, 2)).symplectic_residual() < 1e-12);
  }
}

TEST_CASE("phase shift sign agrees with the oracle") {
  const GaussianState out = apply_symplectic(coherent(1, 0, 2.0, 0.0), phase_shift(pi / 2));
  CHECK(out.mean()(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out.mean()(1) == doctest::Approx(-2.0).epsilon(1e-12));

  fock::FockState f = fock::vacuum_state(fock::FockBasis(1, 25));
  f = fock::apply_gate_exact(f, fock::Displace{0, 2.0, 0.0});
  f = fock::apply_gate_exact(f, fock::PhaseShift{0, pi / 2});
  CHECK(distance(out, fock::moments(f)) < 1e-9);
}

TEST_CASE("50:50 beamsplitter") {
  const GaussianState v = apply_symplectic(vacuum(2), beamsplitter(pi / 4, 0.0));
  CHECK(max_abs(v.cov() - Matrix::Identity(4, 4)) < 1e-15);

  const GaussianState out = apply_symplectic(coherent(2, 0, 2.0, 0.0), beamsplitter(pi / 4, 0.0));
  CHECK(std::abs(out.mean()(0)) == doctest::Approx(std::sqrt(2.0)));
  CHECK(std::abs(out.mean()(2)) == doctest::Approx(std::sqrt(2.0)));

  fock::FockState f = fock::vacuum_state(fock::FockBasis(2, 20));
  f = fock::apply_gate_exact(f, fock::Displace{0, 2.0, 0.0});
  f = fock::apply_gate_exact(f, fock::Beamsplitter{0, 1, pi / 4, 0.0});
  CHECK(distance(out, fock::moments(f)) < 1e-9);
}

TEST_CASE("squeezed and two-mode squeezed vacuum") {
  const GaussianState sq = apply_symplectic(vacuum(1), squeeze(0.5, 0.0));
  fock::FockState f = fock::apply_gate_exact(fock::vacuum_state(fock::FockBasis(1, 40)),
                                             fock::Squeeze{0, 0.5, 0.0});
  CHECK(distance(sq, fock::moments(f)) < 1e-9);
  CHECK(sq.cov()(0, 0) == doctest::Approx(0.367879).epsilon(1e-6));
  CHECK(sq.cov()(1, 1) == doctest::Approx(2.718282).epsilon(1e-6));

  const GaussianState tms = apply_symplectic(vacuum(2), two_mode_squeeze(0.3));
  fock::FockState g = fock::apply_gate_exact(fock::vacuum_state(fock::FockBasis(2, 30)),
                                             fock::TwoModeSqueeze{0, 1, 0.3});
  CHECK(distance(tms, fock::moments(g)) < 1e-9);
  for (int m = 0; m < 2; ++m) {
    const int idx[] = {m};
    CHECK(max_abs(tms.reduced(idx).cov() - std::cosh(0.6) * Matrix::Identity(2, 2)) < 1e-12);
  }
}

TEST_CASE("displacement") {
  const GaussianState c = apply_symplectic(vacuum(1), displace(2.0, 0.0));
  CHECK(c.mean()(0) == 2.0);
  CHECK(c.cov() == Matrix::Identity(2, 2));
  const GaussianState s = cvsim::testing::Sampler(5).state(1, 4);
  const GaussianState back = apply_symplectic(apply_symplectic(s, displace(1, 1)), displace(-1, -1));
  CHECK(back == s);
}

TEST_CASE("inverse pairs") {
  const GaussianState out =
      apply_symplectic(apply_symplectic(vacuum(1), squeeze(0.5, 0.0)), squeeze(-0.5, 0.0));
  CHECK(max_abs(out.cov() - Matrix::Identity(2, 2)) < 1e-12);
}

TEST_CASE("wiring errors") {
  CHECK_THROWS_AS(apply_symplectic(vacuum(2), beamsplitter(0.1, 0.0, 1, 1)), WiringError);
  CHECK_THROWS_AS(apply_symplectic(vacuum(2), phase_shift(0.1, 2)), WiringError);
  CHECK_THROWS_AS(apply_symplectic(vacuum(2), phase_shift(0.1, -1)), WiringError);
  SymplecticOp bad = phase_shift(0.1);
  bad.s(0, 0) = 2.0;
  CHECK_THROWS_AS(apply_symplectic(vacuum(1), bad), InvalidOperator);
}

TEST_CASE("compose") {
  const SymplecticOp g = squeeze(0.3, 0.2);
  const SymplecticOp c = compose(identity_op({0}), g);
  CHECK(max_abs(c.s - g.s) < 1e-15);
  CHECK(max_abs(compose(phase_shift(0.4), phase_shift(0.9)).s - phase_shift(1.3).s) < 1e-12);

  // 100 random local ops composed and applied once vs sequentially.
  cvsim::testing::Sampler rng(17);
  const GaussianState start = rng.state(3, 5);
  GaussianState seq = start;
  SymplecticOp total = identity_op({0, 1, 2});
  for (int i = 0; i < 100; ++i) {
    const double t = rng.angle();
    SymplecticOp op;
    switch (rng.integer(0, 4)) {
      case 0: op = phase_shift(t, rng.integer(0, 2)); break;
      case 1: op = squeeze(rng.uniform(-0.3, 0.3), t, rng.integer(0, 2)); break;
      case 2: op = displace(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.integer(0, 2)); break;
      case 3: {
        const auto m = rng.pick_modes(3, 2);
        op = beamsplitter(t, rng.angle(), m[0], m[1]);
        break;
      }
      default: {
        const auto m = rng.pick_modes(3, 2);
        op = two_mode_squeeze(rng.uniform(-0.3, 0.3), m[0], m[1]);
      }
    }
    seq = apply_symplectic(seq, op);
    total = compose(op, total);
  }
  CHECK(total.symplectic_residual() < 1e-9);
  CHECK(distance(apply_symplectic(start, total), seq) < 1e-9);
}

TEST_CASE("validate") {
  CHECK_FALSE(validate(GaussianState(Vector::Zero(2), 0.5 * Matrix::Identity(2, 2))).valid);
  cvsim::testing::Sampler rng(23);
  for (int i = 0; i < 100; ++i) CHECK(validate(rng.state(rng.integer(1, 4), 10)).valid);
}

TEST_CASE("local ops touch only their modes") {
  const GaussianState s = cvsim::testing::Sampler(29).state(5, 10);
  const GaussianState out = apply_symplectic(s, beamsplitter(0.3, 0.1, 1, 3));
  for (int i : {0, 1, 4, 5, 8, 9}) {
    for (int j : {0, 1, 4, 5, 8, 9}) CHECK(out.cov()(i, j) == s.cov()(i, j));
  }
}

}
