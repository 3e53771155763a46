#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cvsim/gaussian_state.hpp"

namespace cvsim {

/// Recorded outcomes by label. Homodyne and photon-count outcomes have one
/// component, heterodyne outcomes two (x then p).
using OutcomeTable = std::map<std::string, Vector, std::less<>>;

struct AffineTerm {
  std::string label;
  int component = 0;
  double coeff = 0.0;

  bool operator==(const AffineTerm&) const = default;
};

/// offset + sum_i coeff_i * outcome_i
struct Affine {
  double offset = 0.0;
  std::vector<AffineTerm> terms;

  Affine() = default;
  Affine(double value) : offset(value) {}  // NOLINT(google-explicit-constructor)

  bool is_constant() const noexcept { return terms.empty(); }
  /// Throws InvalidArgument when a referenced label is missing.
  double evaluate(const OutcomeTable& outcomes) const;

  bool operator==(const Affine&) const = default;
};

enum class InitKind { vacuum, coherent, squeezed, fock };

struct InitialState {
  InitKind kind = InitKind::vacuum;
  /// coherent: (dx, dp); squeezed: (r, phi).
  double a = 0.0;
  double b = 0.0;
  /// fock: photon number.
  int n = 0;

  bool operator==(const InitialState&) const = default;
};

enum class GateKind { phase_shift, beamsplitter, squeeze, two_mode_squeeze, displace };
enum class ChannelKind { loss, amplifier, noise, phase_sensitive_amp };

/// Parameters are stored in the fixed order of param_names().
struct GateNode {
  GateKind kind = GateKind::phase_shift;
  std::vector<int> modes;
  std::vector<Affine> params;

  bool operator==(const GateNode&) const = default;
};

struct ChannelNode {
  ChannelKind kind = ChannelKind::loss;
  std::vector<int> modes;
  std::vector<Affine> params;

  bool operator==(const ChannelNode&) const = default;
};

enum class MeasureKind { homodyne, heterodyne, vacproj };

struct MeasureNode {
  std::string label;
  MeasureKind kind = MeasureKind::homodyne;
  std::vector<int> modes;
  double angle = 0.0;
  double efficiency = 1.0;

  bool operator==(const MeasureNode&) const = default;
};

/// A gate or channel whose parameters depend on earlier outcomes.
struct FeedforwardNode {
  std::variant<GateNode, ChannelNode> target;

  bool operator==(const FeedforwardNode&) const = default;
};

enum class NonGaussianKind { kerr, photon_count, absorption };

struct NonGaussianNode {
  NonGaussianKind kind = NonGaussianKind::kerr;
  std::vector<int> modes;
  /// kerr strength.
  double chi = 0.0;
  /// photon_count and absorption.
  std::string label;

  bool operator==(const NonGaussianNode&) const = default;
};

using NodeBody = std::variant<GateNode, ChannelNode, MeasureNode, FeedforwardNode, NonGaussianNode>;

struct Node {
  NodeBody body;
  /// Source line; not part of node identity.
  int line = 0;

  bool operator==(const Node& other) const { return body == other.body; }
};

enum class OutputKind { moments, samples, probabilities };

struct CircuitIR {
  int n_modes = 0;
  std::vector<InitialState> initial_states;
  std::vector<Node> nodes;
  /// Requested reports; empty means all.
  std::vector<OutputKind> outputs;

  bool operator==(const CircuitIR&) const = default;
};

const char* keyword(GateKind kind);
const char* keyword(ChannelKind kind);
const char* keyword(MeasureKind kind);
const char* keyword(NonGaussianKind kind);
const char* keyword(InitKind kind);
const char* keyword(OutputKind kind);
const std::vector<std::string>& param_names(GateKind kind);
const std::vector<std::string>& param_names(ChannelKind kind);
int arity(GateKind kind);

/// Label defined by a node, if any.
std::optional<std::string> defined_label(const NodeBody& body);
/// Modes touched by a node.
const std::vector<int>& node_modes(const NodeBody& body);

/// Throws ParseError (syntax or semantic) with a 1-based line and column.
CircuitIR parse(std::string_view source);

/// Canonical source text; parse(print(ir)) == ir.
std::string print(const CircuitIR& ir);

}  // namespace cvsim
