#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "cvsim/circuit.hpp"
#include "cvsim/classifier.hpp"
#include "cvsim/error.hpp"
#include "cvsim/instrumentation.hpp"
#include "random_instances.hpp"
#include "test_util.hpp"

using namespace cvsim;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ParseError parse_error(std::string_view src) {
  try {
    parse(src);
  } catch (const ParseError& e) {
    return e;
  }
  FAIL("expected a parse error");
  return ParseError(ErrorKind::syntax, 0, 0, "");
}

}  // namespace

TEST_SUITE("circuit") {

TEST_CASE("minimal circuit") {
  const CircuitIR ir = parse("modes 1\ninit 0 vacuum\nx = homodyne 0 angle=0");
  CHECK(ir.n_modes == 1);
  REQUIRE(ir.nodes.size() == 1);
  const auto* m = std::get_if<MeasureNode>(&ir.nodes[0].body);
  REQUIRE(m);
  CHECK(m->label == "x");
  CHECK(m->kind == MeasureKind::homodyne);
  CHECK(ir.nodes[0].line == 3);
}

TEST_CASE("feedforward coefficients") {
  const CircuitIR ir = parse("modes 2\nm1 = homodyne 1 angle=0\ndisp 0 dx=2*m1 dp=0");
  const auto* ff = std::get_if<FeedforwardNode>(&ir.nodes[1].body);
  REQUIRE(ff);
  const auto& g = std::get<GateNode>(ff->target);
  CHECK(g.kind == GateKind::displace);
  CHECK(g.params[0].offset == 0.0);
  REQUIRE(g.params[0].terms.size() == 1);
  CHECK(g.params[0].terms[0].label == "m1");
  CHECK(g.params[0].terms[0].coeff == 2.0);
  CHECK(g.params[1].is_constant());

  const CircuitIR ir2 = parse(
      "modes 2\nm = heterodyne 1\ndisp 0 dx=(m + m)/2 - 0.5*m.p + 1 dp=-(m.p)");
  const auto& g2 = std::get<GateNode>(std::get<FeedforwardNode>(ir2.nodes[1].body).target);
  CHECK(g2.params[0].offset == 1.0);
  REQUIRE(g2.params[0].terms.size() == 2);
  OutcomeTable t{{"m", Vector::Ones(2) * 3.0}};
  CHECK(g2.params[0].evaluate(t) == doctest::Approx(1.0 + 3.0 - 1.5));
  CHECK(g2.params[1].evaluate(t) == doctest::Approx(-3.0));
}

TEST_CASE("syntax errors carry a location") {
  ParseError e = parse_error("modes 3\nm1 = homodyne 0 angle=0\nm2 = homodyne 1 angle=0\ndisp 2 dx=m1*m2 dp=0");
  CHECK(e.kind() == ErrorKind::syntax);
  CHECK(e.line() == 4);
  CHECK(e.column() > 0);

  e = parse_error("modes 1\nsq 0 r=0.1");
  CHECK(e.kind() == ErrorKind::syntax);
  CHECK(e.line() == 2);
  e = parse_error("modes 1\nfrobnicate 0");
  CHECK(e.line() == 2);
  CHECK(e.column() == 1);
  e = parse_error("modes 1\nsq 0 r=0.1 phi=");
  CHECK_FALSE(e.expected().empty());
  e = parse_error("modes 2\nx = homodyne 0 angle=0\ndisp 1 dx=1/x dp=0");
  CHECK(e.kind() == ErrorKind::syntax);
}

TEST_CASE("semantic errors") {
  CHECK(parse_error("modes 1\ndisp 0 dx=m dp=0").kind() == ErrorKind::semantic);
  CHECK(parse_error("modes 1\nps 1 theta=0").kind() == ErrorKind::semantic);
  CHECK(parse_error("modes 2\nbs 0 0 theta=1 phi=0").kind() == ErrorKind::semantic);
  CHECK(parse_error("modes 1\nx = homodyne 0 angle=0\nps 0 theta=1").kind() == ErrorKind::semantic);
  CHECK(parse_error("modes 2\nx = homodyne 0 angle=0\nx = homodyne 1 angle=0").kind() ==
        ErrorKind::semantic);
  CHECK(parse_error("modes 1\nloss 0 eta=1.5").kind() == ErrorKind::semantic);
  CHECK(parse_error("modes 2\nx = homodyne 0 angle=0\ndisp 1 dx=x.p dp=0").kind() ==
        ErrorKind::semantic);
  CHECK(parse_error("modes 2\nv = vacproj 0\ndisp 1 dx=v dp=0").kind() == ErrorKind::semantic);
  CHECK(parse_error("modes 1\nps 0 theta=1\ninit 0 vacuum").kind() == ErrorKind::semantic);
}

TEST_CASE("print round trip") {
  for (int i = 1; i <= 5; ++i) {
    const CircuitIR ir = parse(read_file(cvsim::testing::data_path(fmt::format("resource_row{}.circ", i))));
    CHECK(parse(print(ir)) == ir);
  }
  const CircuitIR t = parse(read_file(cvsim::testing::data_path("teleport.circ")));
  CHECK(parse(print(t)) == t);
  CHECK(print(parse(print(t))) == print(t));

  cvsim::testing::Sampler rng(1);
  for (int i = 0; i < 50; ++i) {
    const CircuitIR ir = rng.circuit(rng.integer(1, 4), 12);
    CHECK(parse(print(ir)) == ir);
  }
}

TEST_CASE("classifier table rows") {
  const Verdict expected[] = {Verdict::simulatable, Verdict::not_efficiently_simulatable,
                              Verdict::not_efficiently_simulatable,
                              Verdict::not_efficiently_simulatable, Verdict::unknown};
  for (int i = 1; i <= 5; ++i) {
    const CircuitIR ir = parse(read_file(cvsim::testing::data_path(fmt::format("resource_row{}.circ", i))));
    const SimulatabilityReport r = classify(ir);
    CHECK(r.verdict == expected[i - 1]);
    REQUIRE(r.matched_row);
    CHECK(*r.matched_row == i);
    CHECK(r.witnesses.empty() == (i == 1));
  }
}

TEST_CASE("classifier witnesses") {
  const CircuitIR kerr = parse("modes 2\nsq 0 r=0.1 phi=0\nkerr 1 chi=0.2\nx = homodyne 0 angle=0");
  const SimulatabilityReport r = classify(kerr);
  CHECK(r.verdict == Verdict::not_efficiently_simulatable);
  REQUIRE(r.witnesses.size() == 1);
  CHECK(r.witnesses[0].node == "node 1");
  CHECK(r.witnesses[0].line == 3);

  const CircuitIR row5 = parse("modes 2\ninit 0 fock 1\nsq 1 r=0.2 phi=0\nx = homodyne 1 angle=0");
  const SimulatabilityReport u = classify(row5);
  CHECK(u.verdict == Verdict::unknown);
  REQUIRE(u.witnesses.size() == 1);
  CHECK(u.witnesses[0].node == "init 0");

  CHECK(classify(parse("modes 1\ninit 0 fock 0")).verdict == Verdict::simulatable);
  CHECK(classify(parse("modes 2\nv = vacproj 0")).verdict == Verdict::simulatable);
  CHECK(classify(parse("modes 2\nv = vacproj 0 branch=absorption")).verdict !=
        Verdict::simulatable);
}

TEST_CASE("classification never evolves a state") {
  const CircuitIR ir = parse(read_file(cvsim::testing::data_path("teleport.circ")));
  instrumentation::reset_evolution_count();
  (void)classify(ir);
  CHECK(instrumentation::evolution_count() == 0);
}

}
