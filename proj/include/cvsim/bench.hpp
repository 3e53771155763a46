#pragma once

#include <cstdint>
#include <vector>

#include "cvsim/circuit.hpp"

namespace cvsim {

struct BenchPoint {
  int n_modes = 0;
  int n_gates = 0;
  double seconds = 0.0;
};

struct BenchReport {
  std::vector<BenchPoint> points;
  /// Least-squares slope of log(seconds) against log(n_modes).
  double slope = 0.0;
};

/// Vacuum input, `gates_per_mode * n_modes` random local gates (one-mode
/// gates and nearest-neighbour beamsplitters / two-mode squeezers), no
/// measurements.
CircuitIR bench_circuit(int n_modes, int gates_per_mode, std::uint64_t seed);

double loglog_slope(const std::vector<BenchPoint>& points);

/// Best-of-`repeats` wall time of execute() per size.
BenchReport run_bench(const std::vector<int>& sizes, int gates_per_mode, int repeats,
                      std::uint64_t seed);

}  // namespace cvsim
