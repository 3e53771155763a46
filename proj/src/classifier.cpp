#include "cvsim/classifier.hpp"

#include <fmt/format.h>
#include <set>

namespace cvsim {

const char* to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::simulatable: return "SIMULATABLE";
    case Verdict::not_efficiently_simulatable: return "NOT_EFFICIENTLY_SIMULATABLE";
    case Verdict::unknown: return "UNKNOWN";
  }
  return "?";
}

const char* row_description(int row) {
  switch (row) {
    case 1: return "vacua; linear optics, squeezing; Gaussian CP measurements -> yes";
    case 2: return "vacua; linear optics, squeezing, Kerr nonlinearity; homodyne -> no";
    case 3: return "single photons; linear optics only; photon counting -> no";
    case 4: return "vacua; linear optics, squeezing; photon counting and homodyne -> no";
    case 5: return "single photons; linear optics, squeezing; homodyne -> unresolved";
  }
  return "";
}

SimulatabilityReport classify(const CircuitIR& ir) {
  SimulatabilityReport report;
  bool fock_inputs = false;
  bool kerr = false;
  bool counting = false;

  for (int m = 0; m < ir.n_modes; ++m) {
    const InitialState& s = ir.initial_states[m];
    if (s.kind == InitKind::fock && s.n > 0) {
      fock_inputs = true;
      report.witnesses.push_back(
          {fmt::format("init {}", m), fmt::format("Fock-state input |{}>", s.n), 0});
    }
  }

  std::set<std::string, std::less<>> counting_labels;
  for (std::size_t i = 0; i < ir.nodes.size(); ++i) {
    const Node& node = ir.nodes[i];
    const std::string id = fmt::format("node {}", i);
    if (const auto* ng = std::get_if<NonGaussianNode>(&node.body)) {
      switch (ng->kind) {
        case NonGaussianKind::kerr:
          kerr = true;
          report.witnesses.push_back({id, "Kerr nonlinearity", node.line});
          break;
        case NonGaussianKind::photon_count:
          counting = true;
          counting_labels.insert(ng->label);
          report.witnesses.push_back({id, "photon counting", node.line});
          break;
        case NonGaussianKind::absorption:
          counting = true;
          report.witnesses.push_back({id, "conditioning on the absorption outcome", node.line});
          break;
      }
    } else if (const auto* ff = std::get_if<FeedforwardNode>(&node.body)) {
      const auto& params =
          std::visit([](const auto& t) -> const std::vector<Affine>& { return t.params; }, ff->target);
      bool non_gaussian = false;
      for (const Affine& a : params) {
        for (const AffineTerm& t : a.terms) non_gaussian |= counting_labels.count(t.label) > 0;
      }
      if (non_gaussian) {
        report.witnesses.push_back({id, "feedforward on a photon-count outcome", node.line});
      }
    }
  }

  if (report.witnesses.empty()) {
    report.verdict = Verdict::simulatable;
    report.matched_row = 1;
  } else if (kerr) {
    report.verdict = Verdict::not_efficiently_simulatable;
    report.matched_row = 2;
  } else if (counting && fock_inputs) {
    report.verdict = Verdict::not_efficiently_simulatable;
    report.matched_row = 3;
  } else if (counting) {
    report.verdict = Verdict::not_efficiently_simulatable;
    report.matched_row = 4;
  } else if (fock_inputs) {
    report.verdict = Verdict::unknown;
    report.matched_row = 5;
  } else {
    report.verdict = Verdict::unknown;
  }
  return report;
}

}  // namespace cvsim
