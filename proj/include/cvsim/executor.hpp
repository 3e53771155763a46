#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cvsim/circuit.hpp"
#include "cvsim/fock.hpp"
#include "cvsim/measurement.hpp"

namespace cvsim {

struct RunOptions {
  /// Outcomes replayed instead of sampled, by label.
  OutcomeTable forced;
  /// Shot index fed to the stream splitter.
  std::uint64_t shot = 0;
};

struct RunResult {
  std::uint64_t seed = 0;
  /// Empty when every mode was measured.
  std::optional<GaussianState> final_state;
  /// Circuit index of each mode of final_state.
  std::vector<int> surviving_modes;
  std::vector<MeasurementRecord> records;
  /// Product of the no-absorption probabilities of all vacproj nodes.
  double post_selection_probability = 1.0;

  OutcomeTable outcomes() const;
};

/// The initial product state of the circuit. Fock inputs are rejected.
GaussianState initial_state(const CircuitIR& ir);

/// Runs the circuit on the Gaussian engine. Measurement outcomes are drawn
/// from RngStream::split(seed, options.shot, label) unless forced. Throws
/// RefusalError on non-Gaussian elements and rethrows numerical errors with
/// the node position and source line prepended.
RunResult execute(const CircuitIR& ir, std::uint64_t seed, const RunOptions& options = {});

struct FockRunOptions {
  int cutoff = 20;
  std::optional<int> max_total;
  OutcomeTable forced;
  std::uint64_t shot = 0;
  /// Stop as soon as an intermediate state's truncation health metric
  /// exceeds this value.
  std::optional<double> health_limit;
};

struct FockRunResult {
  std::uint64_t seed = 0;
  std::optional<fock::FockState> final_state;
  std::vector<int> surviving_modes;
  std::vector<MeasurementRecord> records;
  /// Product of branch probabilities of vacproj nodes (either branch).
  double post_selection_probability = 1.0;
  /// Largest truncation health metric seen after any node.
  double worst_health = 0.0;
  /// Node index at which health_limit stopped the run, or -1.
  int stopped_at = -1;
};

/// Runs any circuit of at most three modes on the truncated Fock oracle,
/// including Kerr gates, Fock inputs, photon counting and absorption branches.
FockRunResult execute_fock(const CircuitIR& ir, std::uint64_t seed,
                           const FockRunOptions& options);

struct LabelStatistics {
  /// One row per shot, in shot order.
  std::vector<Vector> samples;
  Vector mean;
  /// Unbiased sample covariance (zero for a single shot).
  Matrix cov;
};

struct ShotStatistics {
  std::uint64_t seed = 0;
  std::size_t n_shots = 0;
  std::map<std::string, LabelStatistics, std::less<>> labels;
  double mean_post_selection_probability = 1.0;
};

/// Worker count from CVSIM_WORKERS if set, else the hardware concurrency.
unsigned default_workers();

/// Independent executions of shots 0 .. n_shots-1. Every shot writes into
/// its own slot, so the result does not depend on `workers`.
ShotStatistics run_shots(const CircuitIR& ir, std::uint64_t seed, std::size_t n_shots,
                         unsigned workers = 0);

}  // namespace cvsim
