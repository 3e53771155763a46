#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cvsim/circuit.hpp"

namespace cvsim {

enum class Verdict { simulatable, not_efficiently_simulatable, unknown };

const char* to_string(Verdict verdict);

struct Witness {
  /// "node <index>" (0-based position in CircuitIR::nodes) or "init <mode>".
  std::string node;
  std::string reason;
  int line = 0;

  bool operator==(const Witness&) const = default;
};

struct SimulatabilityReport {
  Verdict verdict = Verdict::simulatable;
  std::vector<Witness> witnesses;
  /// Resource-table row (1-5) the circuit falls under, if any.
  std::optional<int> matched_row;
};

/// Resource-table rows:
///   1 vacua, linear optics and squeezing, Gaussian measurements: efficiently simulatable
///   2 as 1 plus a Kerr nonlinearity: universal (not efficiently simulatable)
///   3 single photons, linear optics, photon counting: universal
///   4 vacua, linear optics and squeezing, photon counting and homodyne: universal
///   5 single photons, linear optics and squeezing, homodyne: open
const char* row_description(int row);

/// Static analysis only; never evolves a state.
SimulatabilityReport classify(const CircuitIR& ir);

}  // namespace cvsim
