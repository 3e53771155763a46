#include "cvsim/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "cvsim/error.hpp"
#include "cvsim/executor.hpp"

namespace cvsim {

CircuitIR bench_circuit(int n_modes, int gates_per_mode, std::uint64_t seed) {
  if (n_modes < 2) throw InvalidArgument("bench needs at least 2 modes");
  CircuitIR ir;
  ir.n_modes = n_modes;
  ir.initial_states.assign(static_cast<std::size_t>(n_modes), InitialState{});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> small(-0.5, 0.5);
  std::uniform_int_distribution<int> kind(0, 4);
  std::uniform_int_distribution<int> mode(0, n_modes - 1);
  const long total = static_cast<long>(gates_per_mode) * n_modes;
  for (long i = 0; i < total; ++i) {
    GateNode g;
    g.kind = static_cast<GateKind>(kind(rng));
    const int m = mode(rng);
    g.modes = {m};
    if (arity(g.kind) == 2) g.modes.push_back((m + 1) % n_modes);
    switch (g.kind) {
      case GateKind::phase_shift: g.params = {angle(rng)}; break;
      case GateKind::beamsplitter: g.params = {angle(rng), angle(rng)}; break;
      case GateKind::squeeze: g.params = {small(rng), angle(rng)}; break;
      case GateKind::two_mode_squeeze: g.params = {small(rng)}; break;
      case GateKind::displace: g.params = {small(rng), small(rng)}; break;
    }
    ir.nodes.push_back({g, 0});
  }
  return ir;
}

double loglog_slope(const std::vector<BenchPoint>& points) {
  if (points.size() < 2) throw InvalidArgument("slope needs at least two sizes");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const BenchPoint& p : points) {
    const double x = std::log(static_cast<double>(p.n_modes));
    const double y = std::log(std::max(p.seconds, 1e-9));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(points.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

BenchReport run_bench(const std::vector<int>& sizes, int gates_per_mode, int repeats,
                      std::uint64_t seed) {
  if (repeats < 1) throw InvalidArgument("repeats must be positive");
  BenchReport report;
  for (int n : sizes) {
    const CircuitIR ir = bench_circuit(n, gates_per_mode, seed);
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < repeats; ++r) {
      const auto start = std::chrono::steady_clock::now();
      const RunResult result = execute(ir, seed);
      const auto stop = std::chrono::steady_clock::now();
      best = std::min(best, std::chrono::duration<double>(stop - start).count());
      if (!result.final_state) throw NumericalError("bench run lost its state");
    }
    report.points.push_back({n, static_cast<int>(ir.nodes.size()), best});
  }
  report.slope = loglog_slope(report.points);
  return report;
}

}  // namespace cvsim
