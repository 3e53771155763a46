#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "cvsim/error.hpp"
#include "cvsim/executor.hpp"
#include "cvsim/run_result.hpp"
#include "random_instances.hpp"
#include "test_util.hpp"

using namespace cvsim;
using cvsim::testing::distance;
using cvsim::testing::max_abs;

namespace {

CircuitIR load(const std::string& name) {
  std::ifstream in(cvsim::testing::data_path(name));
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string teleport(double r) {
  return fmt::format(
      "modes 3\ninit 0 coherent 1 0.5\ntms 1 2 r={}\nbs 0 1 theta=-pi/4 phi=0\n"
      "mx = homodyne 0 angle=0\nmp = homodyne 1 angle=pi/2\n"
      "disp 2 dx=1.4142135623730951*mx dp=-1.4142135623730951*mp\n",
      r);
}

}  // namespace

TEST_SUITE("executor") {

TEST_CASE("empty circuit") {
  const RunResult r = execute(load("empty.circ"), 7);
  REQUIRE(r.final_state);
  CHECK(distance(*r.final_state, vacuum(2)) == 0.0);
  CHECK(r.records.empty());
  CHECK(r.post_selection_probability == 1.0);
  CHECK(r.surviving_modes == std::vector<int>{0, 1});
}

TEST_CASE("teleportation chain") {
  // Unity-gain teleportation of a coherent input: averaged over outcomes the
  // output is the input plus 2 e^{-2r} vacuum units of noise, so per-shot
  // means scatter around (1, 0.5) less and less as r grows.
  const Vector input = (Vector(2) << 1.0, 0.5).finished();
  double previous = 1e300;
  for (double r : {0.3, 0.5, 1.0, 2.0, 4.0}) {
    const CircuitIR ir = parse(teleport(r));
    const int shots = 2000;
    Matrix means(2, shots);
    Matrix cond;
    for (int s = 0; s < shots; ++s) {
      const RunResult res = execute(ir, 3, {{}, static_cast<std::uint64_t>(s)});
      means.col(s) = res.final_state->mean();
      if (s == 0) cond = res.final_state->cov();
      CHECK(max_abs(res.final_state->cov() - cond) < 1e-12);
    }
    const Vector avg = means.rowwise().mean();
    const Matrix centred = means.colwise() - avg;
    const Matrix spread = centred * centred.transpose() / (shots - 1);
    for (int k = 0; k < 2; ++k) {
      CHECK(std::abs(avg(k) - input(k)) < 5.0 * std::sqrt(spread(k, k) / shots) + 1e-12);
    }
    const Matrix total = cond + spread;
    const double excess = 2.0 * std::exp(-2.0 * r);
    CHECK(max_abs(total - (1.0 + excess) * Matrix::Identity(2, 2)) < 0.2 * (1.0 + excess));
    const double residual = (means.colwise() - input).cwiseAbs().maxCoeff();
    CHECK(residual < previous);
    previous = residual;
  }
}

TEST_CASE("teleportation agrees with the oracle") {
  for (double r : {0.3, 0.5}) {
    const CircuitIR ir = parse(teleport(r));
    RunOptions o;
    o.forced = {{"mx", Vector::Constant(1, 0.4)}, {"mp", Vector::Constant(1, -0.2)}};
    const RunResult g = execute(ir, 1, o);
    FockRunOptions f;
    f.cutoff = 20;
    f.max_total = 20;
    f.forced = o.forced;
    const FockRunResult fr = execute_fock(ir, 1, f);
    const fock::ComparisonReport c = fock::compare(*g.final_state, *fr.final_state, 1e-5, 1e-6);
    CHECK(c.status == fock::ComparisonStatus::pass);
  }
}

TEST_CASE("vacuum projection post-selection") {
  const CircuitIR ir = parse("modes 2\ninit 0 coherent 2 0\nv = vacproj 0");
  const RunResult r = execute(ir, 0);
  CHECK(std::abs(r.post_selection_probability - std::exp(-1.0)) < 1e-8);
  CHECK(r.surviving_modes == std::vector<int>{1});
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].no_absorption);
}

TEST_CASE("refusal and the Fock backend") {
  const CircuitIR ir = load("kerr.circ");
  try {
    execute(ir, 0);
    FAIL("expected refusal");
  } catch (const RefusalError& e) {
    CHECK(e.node() == 0);
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
  FockRunOptions o;
  o.cutoff = 20;
  const FockRunResult f = execute_fock(ir, 0, o);
  CHECK(f.records.size() == 1);
  CHECK_FALSE(f.final_state.has_value());

  CHECK_THROWS_AS(execute(parse("modes 1\ninit 0 fock 1"), 0), RefusalError);
  const FockRunResult one = execute_fock(parse("modes 1\ninit 0 fock 1"), 0, o);
  CHECK(max_abs(fock::moments(*one.final_state).cov - 3.0 * Matrix::Identity(2, 2)) < 1e-12);
}

TEST_CASE("feedforward domain errors are numerical") {
  const CircuitIR ir = parse("modes 2\nx = homodyne 0 angle=0\nloss 1 eta=0.5+x");
  RunOptions o;
  o.forced = {{"x", Vector::Constant(1, 2.0)}};
  try {
    execute(ir, 0, o);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_argument);
    CHECK(std::string(e.what()).find("node 1") != std::string::npos);
  }
}

TEST_CASE("forced outcomes replay exactly") {
  const CircuitIR ir = load("resource_row1.circ");
  RunOptions o;
  o.forced = {{"m0", Vector::Constant(1, 0.25)}};
  const RunResult a = execute(ir, 1, o);
  const RunResult b = execute(ir, 2, o);
  CHECK(a.outcomes().at("m0")(0) == 0.25);
  CHECK(b.outcomes().at("m0")(0) == 0.25);
  CHECK(a.outcomes().at("m1") != b.outcomes().at("m1"));
}

TEST_CASE("random circuits match the oracle on small instances") {
  cvsim::testing::Sampler rng(77);
  int healthy = 0;
  for (int i = 0; i < 20; ++i) {
    const CircuitIR ir = rng.circuit(1, rng.integer(1, 6));
    const RunResult g = execute(ir, 0);
    FockRunOptions o = cvsim::testing::oracle_options(1);
    const FockRunResult f = execute_fock(ir, 0, o);
    const auto c = fock::compare(*g.final_state, *f.final_state, 1e-6, 1e-9);
    CHECK(c.status != fock::ComparisonStatus::fail);
    healthy += c.healthy;
  }
  CHECK(healthy >= 10);
}

TEST_CASE("run_shots") {
  const CircuitIR ir = parse("modes 1\nx = homodyne 0 angle=0");
  const ShotStatistics a = run_shots(ir, 5, 2000, 1);
  const ShotStatistics b = run_shots(ir, 5, 2000, 8);
  CHECK(a.labels.at("x").samples == b.labels.at("x").samples);
  CHECK(a.labels.at("x").mean == b.labels.at("x").mean);
  const ShotStatistics c = run_shots(ir, 6, 2000, 1);
  CHECK(a.labels.at("x").samples != c.labels.at("x").samples);
  // Shot s reproduces a single execute() with the same stream key.
  const RunResult one = execute(ir, 5, {{}, 17});
  CHECK(one.outcomes().at("x") == a.labels.at("x").samples[17]);
  CHECK_THROWS_AS(run_shots(ir, 5, 0, 1), InvalidArgument);
}

TEST_CASE("structured output round trip") {
  const RunResult r = execute(load("teleport.circ"), 11);
  const std::string text = to_json(r);
  const RunResult back = run_result_from_json(text);
  CHECK(back.seed == r.seed);
  CHECK(*back.final_state == *r.final_state);
  CHECK(back.outcomes() == r.outcomes());
  CHECK(to_json(back) == text);
  CHECK(to_json(execute(load("teleport.circ"), 11)) == text);
  CHECK_THROWS_AS(run_result_from_json("{\"schema_version\": 99}"), InvalidArgument);
  CHECK_THROWS_AS(run_result_from_json("not json"), InvalidArgument);
}

}
