#include <cmath>

#include "cvsim/channels.hpp"
#include "cvsim/error.hpp"
#include "cvsim/fock.hpp"
#include "random_instances.hpp"
#include "test_util.hpp"

using namespace cvsim;
using cvsim::testing::distance;
using cvsim::testing::max_abs;

namespace {

bool same_action(const GaussianChannel& a, const GaussianChannel& b, double tol) {
  return max_abs(a.x - b.x) <= tol && max_abs(a.y - b.y) <= tol && max_abs(a.d - b.d) <= tol;
}

GaussianState squeezed(double r) { return apply_symplectic(vacuum(1), squeeze(r, 0.0)); }

fock::FockState squeezed_fock(double r, int cutoff) {
  return fock::apply_gate_exact(fock::vacuum_state(fock::FockBasis(1, cutoff)),
                                fock::Squeeze{0, r, 0.0});
}

}  // namespace

TEST_SUITE("channels") {

TEST_CASE("loss") {
  CHECK(same_action(make_loss(1.0), identity_channel({0}), 0.0));

  const GaussianState out = apply_channel(squeezed(0.5), make_loss(0.5));
  const fock::FockState f =
      fock::apply_channel_exact(squeezed_fock(0.5, 40), fock::Loss{0, 0.5});
  CHECK(distance(out, fock::moments(f)) < 1e-9);
  CHECK(out.cov()(0, 0) == doctest::Approx(0.683940).epsilon(1e-6));
  CHECK(out.cov()(1, 1) == doctest::Approx(1.859141).epsilon(1e-6));

  const GaussianState s = cvsim::testing::Sampler(2).state(1, 8);
  CHECK(distance(apply_channel(s, make_loss(0.0)), vacuum(1)) < 1e-15);
  CHECK_THROWS_AS(make_loss(1.5), InvalidArgument);
  CHECK_THROWS_AS(make_loss(-0.1), InvalidArgument);
}

TEST_CASE("amplifier") {
  CHECK(same_action(make_amplifier(1.0), identity_channel({0}), 0.0));
  const GaussianState out = apply_channel(vacuum(1), make_amplifier(2.0));
  CHECK(max_abs(out.cov() - 3.0 * Matrix::Identity(2, 2)) < 1e-12);

  // Dilation oracle: two-mode squeezer with a vacuum ancilla, then trace.
  const fock::FockState f =
      fock::amplifier_by_dilation(fock::vacuum_state(fock::FockBasis(1, 30)), 0, 2.0);
  CHECK(distance(out, fock::moments(f)) < 1e-6);
  CHECK_THROWS_AS(make_amplifier(0.5), InvalidArgument);
}

TEST_CASE("phase-sensitive amplifier") {
  CHECK(same_action(make_phase_sensitive_amp(1.0, 0.0), identity_channel({0}), 1e-15));

  const GaussianChannel psa = make_phase_sensitive_amp(std::exp(0.5), 0.0);
  const GaussianChannel sq = as_channel(squeeze(-0.5, 0.0));
  CHECK(same_action(psa, sq, 1e-12));

  const GaussianChannel ch = make_phase_sensitive_amp(2.0, 0.1);
  CHECK(is_cp(ch).is_cp);
  const GaussianState out = apply_channel(vacuum(1), ch);
  CHECK(out.cov()(0, 0) == doctest::Approx(4.1).epsilon(1e-12));
  CHECK(out.cov()(1, 1) == doctest::Approx(0.35).epsilon(1e-12));

  fock::FockState f = fock::apply_channel_exact(
      fock::vacuum_state(fock::FockBasis(1, 30)), fock::PhaseSensitiveAmp{0, std::exp(0.3), 0.2});
  CHECK(distance(apply_channel(vacuum(1), make_phase_sensitive_amp(std::exp(0.3), 0.2)),
                 fock::moments(f)) < 1e-6);
}

TEST_CASE("additive noise") {
  CHECK(same_action(make_additive_noise(Matrix::Zero(2, 2)), identity_channel({0}), 0.0));
  const GaussianState out = apply_channel(vacuum(1), make_additive_noise(Matrix::Identity(2, 2)));
  CHECK(max_abs(out.cov() - 2.0 * Matrix::Identity(2, 2)) < 1e-15);
  Matrix bad(2, 2);
  bad << 1, 0, 0, -1;
  CHECK_THROWS_AS(make_additive_noise(bad), InvalidArgument);
}

TEST_CASE("apply_channel on a mode subset") {
  const GaussianState s = cvsim::testing::Sampler(4).state(2, 6);
  CHECK(apply_channel(s, identity_channel({0, 1})) == s);
  const GaussianState a = apply_channel(apply_channel(vacuum(1), make_amplifier(2.0)), make_loss(0.5));
  CHECK(max_abs(a.cov() - 2.0 * Matrix::Identity(2, 2)) < 1e-12);
}

TEST_CASE("is_cp") {
  CHECK(is_cp(make_loss(0.3)).is_cp);
  GaussianChannel amp;
  amp.x = std::sqrt(2.0) * Matrix::Identity(2, 2);
  amp.y = Matrix::Zero(2, 2);
  amp.d = Vector::Zero(2);
  amp.modes = {0};
  const CpReport r = is_cp(amp);
  CHECK_FALSE(r.is_cp);
  CHECK(r.min_eigenvalue == doctest::Approx(-1.0));
  cvsim::testing::Sampler rng(6);
  for (int i = 0; i < 50; ++i) {
    Matrix a = Matrix::Random(2, 2);
    CHECK(is_cp(make_additive_noise(a * a.transpose())).is_cp);
  }
  CHECK_THROWS_AS(apply_channel(vacuum(1), amp), InvalidOperator);
}

TEST_CASE("unitary embedding") {
  cvsim::testing::Sampler rng(8);
  for (int i = 0; i < 20; ++i) {
    CHECK(is_cp(as_channel(squeeze(rng.uniform(-1, 1), rng.angle()))).is_cp);
    CHECK(is_cp(as_channel(beamsplitter(rng.angle(), rng.angle()))).is_cp);
  }
  GaussianChannel shear;
  shear.x = Matrix::Identity(2, 2);
  shear.x(0, 1) = 0.0;
  shear.x(0, 0) = 1.1;
  shear.y = Matrix::Zero(2, 2);
  shear.d = Vector::Zero(2);
  shear.modes = {0};
  CHECK_FALSE(is_cp(shear).is_cp);
}

TEST_CASE("compose_channels") {
  const GaussianChannel ch = make_amplifier(1.3, 0);
  CHECK(same_action(compose_channels(identity_channel({0}), ch), ch, 1e-15));
  CHECK(same_action(compose_channels(make_loss(0.6), make_loss(0.5)), make_loss(0.3), 1e-15));

  // amplifier(G) then loss(1/G) is additive noise (2 - 2/G) I.
  for (double g : {1.0, 1.2, 2.0, 5.0}) {
    const GaussianChannel c = compose_channels(make_loss(1.0 / g), make_amplifier(g));
    CHECK(same_action(c, make_additive_noise((2.0 - 2.0 / g) * Matrix::Identity(2, 2)), 1e-12));
  }

  cvsim::testing::Sampler rng(12);
  for (int i = 0; i < 50; ++i) {
    const GaussianChannel a = make_loss(rng.uniform(0, 1), 0);
    const GaussianChannel b = make_phase_sensitive_amp(rng.uniform(0.5, 2), rng.uniform(0, 1), 1);
    const GaussianChannel c = compose_channels(a, b);
    CHECK(is_cp(c).is_cp);
    const GaussianState s = rng.state(2, 6);
    CHECK(distance(apply_channel(s, c), apply_channel(apply_channel(s, b), a)) < 1e-12);
  }
}

TEST_CASE("minimal noise") {
  Matrix x(2, 2);
  x << 2.0, 0.0, 0.0, 0.25;
  CHECK(max_abs(minimal_noise(x) - 0.5 * Matrix::Identity(2, 2)) < 1e-15);
  CHECK(max_abs(minimal_noise(Matrix::Identity(2, 2))) == 0.0);
}

TEST_CASE("physicality is preserved") {
  cvsim::testing::Sampler rng(14);
  for (int i = 0; i < 200; ++i) {
    GaussianState s = rng.state(2, 3);
    for (int k = 0; k < 5; ++k) {
      const ChannelNode c = rng.channel(2);
      const double p0 = c.params[0].offset;
      GaussianChannel ch;
      switch (c.kind) {
        case ChannelKind::loss: ch = make_loss(p0, c.modes[0]); break;
        case ChannelKind::amplifier: ch = make_amplifier(p0, c.modes[0]); break;
        case ChannelKind::phase_sensitive_amp:
          ch = make_phase_sensitive_amp(p0, c.params[1].offset, c.modes[0]);
          break;
        case ChannelKind::noise: {
          Matrix y(2, 2);
          y << p0, c.params[1].offset, c.params[1].offset, c.params[2].offset;
          ch = make_additive_noise(y, c.modes[0]);
          break;
        }
      }
      s = apply_channel(s, ch);
    }
    CHECK(validate(s).valid);
  }
}

}
