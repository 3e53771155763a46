#pragma once

#include <string>
#include <string_view>

#include "cvsim/classifier.hpp"
#include "cvsim/executor.hpp"

namespace cvsim {

inline constexpr int kSchemaVersion = 1;

/// Structured run document:
///   schema_version, backend, seed, post_selection_probability,
///   records: [{label, kind, modes, outcome, no_absorption, density_or_prob}],
///   outcomes: {label: [..]},
///   final_state: null | {n_modes, surviving_modes,
///                        mean: {length, data}, cov: {rows, cols, data (row-major)}}
/// Doubles are written in shortest round-trip form.
std::string to_json(const RunResult& result, int indent = 2);
/// Fock runs report the oracle's quadrature moments in final_state plus a
/// truncation block.
std::string to_json(const FockRunResult& result, int cutoff, int indent = 2);
std::string to_json(const SimulatabilityReport& report, int indent = 2);
std::string to_json(const ShotStatistics& stats, int indent = 2);

/// Inverse of to_json(RunResult). Throws InvalidArgument on schema violations.
RunResult run_result_from_json(std::string_view text);

}  // namespace cvsim
