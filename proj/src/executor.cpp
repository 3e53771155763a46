#include "cvsim/executor.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fmt/format.h>
#include <mutex>
#include <thread>

#include "cvsim/channels.hpp"
#include "cvsim/error.hpp"

namespace cvsim {

OutcomeTable RunResult::outcomes() const {
  OutcomeTable table;
  for (const MeasurementRecord& r : records) table[r.label] = r.outcome;
  return table;
}

namespace {

[[noreturn]] void rethrow_with_context(const Error& e, const std::string& where) {
  const std::string what = fmt::format("{}: {}", where, e.what());
  switch (e.kind()) {
    case ErrorKind::numerical: throw NumericalError(what);
    case ErrorKind::wiring: throw WiringError(what);
    case ErrorKind::invalid_operator: throw InvalidOperator(what);
    default: throw InvalidArgument(what);
  }
}

std::string node_context(std::size_t index, const Node& node) {
  return fmt::format("node {} (line {})", index, node.line);
}

std::vector<double> evaluate(const std::vector<Affine>& params, const OutcomeTable& outcomes) {
  std::vector<double> out;
  out.reserve(params.size());
  for (const Affine& a : params) out.push_back(a.evaluate(outcomes));
  return out;
}

class ModeMap {
 public:
  explicit ModeMap(int n) : alive_(static_cast<std::size_t>(n)) {
    for (int m = 0; m < n; ++m) alive_[m] = m;
  }
  int index(int mode) const {
    const auto it = std::find(alive_.begin(), alive_.end(), mode);
    if (it == alive_.end()) throw WiringError(fmt::format("mode {} was already measured", mode));
    return static_cast<int>(it - alive_.begin());
  }
  std::vector<int> indices(const std::vector<int>& modes) const {
    std::vector<int> out;
    for (int m : modes) out.push_back(index(m));
    return out;
  }
  void remove(const std::vector<int>& modes) {
    std::erase_if(alive_, [&](int m) { return std::find(modes.begin(), modes.end(), m) != modes.end(); });
  }
  const std::vector<int>& alive() const { return alive_; }

 private:
  std::vector<int> alive_;
};

SymplecticOp gate_op(const GateNode& g, const std::vector<double>& p, const ModeMap& map) {
  const auto idx = map.indices(g.modes);
  switch (g.kind) {
    case GateKind::phase_shift: return phase_shift(p[0], idx[0]);
    case GateKind::beamsplitter: return beamsplitter(p[0], p[1], idx[0], idx[1]);
    case GateKind::squeeze: return squeeze(p[0], p[1], idx[0]);
    case GateKind::two_mode_squeeze: return two_mode_squeeze(p[0], idx[0], idx[1]);
    case GateKind::displace: return displace(p[0], p[1], idx[0]);
  }
  throw InvalidArgument("unknown gate");
}

GaussianChannel channel_op(const ChannelNode& c, const std::vector<double>& p, const ModeMap& map) {
  const int m = map.index(c.modes[0]);
  switch (c.kind) {
    case ChannelKind::loss: return make_loss(p[0], m);
    case ChannelKind::amplifier: return make_amplifier(p[0], m);
    case ChannelKind::phase_sensitive_amp: return make_phase_sensitive_amp(p[0], p[1], m);
    case ChannelKind::noise: {
      Matrix y(2, 2);
      y << p[0], p[1], p[1], p[2];
      return make_additive_noise(y, m);
    }
  }
  throw InvalidArgument("unknown channel");
}

fock::Gate fock_gate(const GateNode& g, const std::vector<double>& p, const ModeMap& map) {
  const auto idx = map.indices(g.modes);
  switch (g.kind) {
    case GateKind::phase_shift: return fock::PhaseShift{idx[0], p[0]};
    case GateKind::beamsplitter: return fock::Beamsplitter{idx[0], idx[1], p[0], p[1]};
    case GateKind::squeeze: return fock::Squeeze{idx[0], p[0], p[1]};
    case GateKind::two_mode_squeeze: return fock::TwoModeSqueeze{idx[0], idx[1], p[0]};
    case GateKind::displace: return fock::Displace{idx[0], p[0], p[1]};
  }
  throw InvalidArgument("unknown gate");
}

fock::Channel fock_channel(const ChannelNode& c, const std::vector<double>& p, const ModeMap& map) {
  const int m = map.index(c.modes[0]);
  switch (c.kind) {
    case ChannelKind::loss: return fock::Loss{m, p[0]};
    case ChannelKind::amplifier: return fock::Amplifier{m, p[0]};
    case ChannelKind::phase_sensitive_amp: return fock::PhaseSensitiveAmp{m, p[0], p[1]};
    case ChannelKind::noise: {
      Eigen::Matrix2d y;
      y << p[0], p[1], p[1], p[2];
      return fock::AdditiveNoise{m, y};
    }
  }
  throw InvalidArgument("unknown channel");
}

const Vector* forced_value(const OutcomeTable& forced, const std::string& label, Eigen::Index size) {
  const auto it = forced.find(label);
  if (it == forced.end()) return nullptr;
  if (it->second.size() != size) {
    throw InvalidArgument(fmt::format("forced outcome for '{}' needs {} component(s), got {}",
                                      label, size, it->second.size()));
  }
  return &it->second;
}

}  // namespace

GaussianState initial_state(const CircuitIR& ir) {
  GaussianState state = vacuum(ir.n_modes);
  for (int m = 0; m < ir.n_modes; ++m) {
    const InitialState& s = ir.initial_states[m];
    switch (s.kind) {
      case InitKind::vacuum: break;
      case InitKind::coherent: state = apply_symplectic(std::move(state), displace(s.a, s.b, m)); break;
      case InitKind::squeezed: state = apply_symplectic(std::move(state), squeeze(s.a, s.b, m)); break;
      case InitKind::fock:
        if (s.n != 0) {
          throw RefusalError(
              fmt::format("init {}: Fock input |{}> is not a Gaussian state", m, s.n), -1);
        }
        break;
    }
  }
  return state;
}

RunResult execute(const CircuitIR& ir, std::uint64_t seed, const RunOptions& options) {
  RunResult result;
  result.seed = seed;
  std::optional<GaussianState> state = initial_state(ir);
  ModeMap map(ir.n_modes);
  OutcomeTable outcomes;

  for (std::size_t i = 0; i < ir.nodes.size(); ++i) {
    const Node& node = ir.nodes[i];
    try {
      std::visit(
          [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, GateNode>) {
              state = apply_symplectic(std::move(*state), gate_op(n, evaluate(n.params, outcomes), map));
            } else if constexpr (std::is_same_v<T, ChannelNode>) {
              state = apply_channel(std::move(*state), channel_op(n, evaluate(n.params, outcomes), map));
            } else if constexpr (std::is_same_v<T, FeedforwardNode>) {
              std::visit(
                  [&](const auto& t) {
                    using U = std::decay_t<decltype(t)>;
                    const auto p = evaluate(t.params, outcomes);
                    if constexpr (std::is_same_v<U, GateNode>) {
                      state = apply_symplectic(std::move(*state), gate_op(t, p, map));
                    } else {
                      state = apply_channel(std::move(*state), channel_op(t, p, map));
                    }
                  },
                  n.target);
            } else if constexpr (std::is_same_v<T, MeasureNode>) {
              const auto idx = map.indices(n.modes);
              RngStream rng = RngStream::split(seed, options.shot, n.label);
              MeasurementResult m;
              switch (n.kind) {
                case MeasureKind::homodyne: {
                  const Vector* f = forced_value(options.forced, n.label, 1);
                  m = homodyne(*state, idx[0], n.angle, n.efficiency,
                               f ? OutcomeSource::forced(*f) : OutcomeSource::sampled(rng));
                  break;
                }
                case MeasureKind::heterodyne: {
                  const Vector* f = forced_value(options.forced, n.label, 2);
                  m = heterodyne(*state, idx[0],
                                 f ? OutcomeSource::forced(*f) : OutcomeSource::sampled(rng));
                  break;
                }
                case MeasureKind::vacproj:
                  m = condition_on_no_absorption(*state, idx);
                  result.post_selection_probability *= m.record.density_or_prob;
                  break;
              }
              m.record.label = n.label;
              m.record.modes = n.modes;
              outcomes[n.label] = m.record.outcome;
              result.records.push_back(std::move(m.record));
              state = std::move(m.state);
              map.remove(n.modes);
            } else {
              throw RefusalError(
                  fmt::format("node {} (line {}): {} is not a Gaussian operation; run it on the "
                              "Fock backend",
                              i, node.line,
                              n.kind == NonGaussianKind::kerr         ? "Kerr nonlinearity"
                              : n.kind == NonGaussianKind::photon_count ? "photon counting"
                                                                        : "absorption conditioning"),
                  static_cast<int>(i));
            }
          },
          node.body);
    } catch (const RefusalError&) {
      throw;
    } catch (const Error& e) {
      rethrow_with_context(e, node_context(i, node));
    }
  }
  result.final_state = std::move(state);
  result.surviving_modes = map.alive();
  return result;
}

FockRunResult execute_fock(const CircuitIR& ir, std::uint64_t seed, const FockRunOptions& options) {
  if (ir.n_modes > 3) {
    throw InvalidArgument(fmt::format("the Fock backend supports at most 3 modes, circuit has {}",
                                      ir.n_modes));
  }
  const fock::FockBasis basis(ir.n_modes, options.cutoff, options.max_total);
  std::vector<int> occupation(static_cast<std::size_t>(ir.n_modes), 0);
  for (int m = 0; m < ir.n_modes; ++m) {
    if (ir.initial_states[m].kind == InitKind::fock) occupation[m] = ir.initial_states[m].n;
  }
  std::optional<fock::FockState> state = fock::number_state(basis, occupation);
  for (int m = 0; m < ir.n_modes; ++m) {
    const InitialState& s = ir.initial_states[m];
    if (s.kind == InitKind::coherent) {
      state = fock::apply_gate_exact(std::move(*state), fock::Displace{m, s.a, s.b});
    } else if (s.kind == InitKind::squeezed) {
      state = fock::apply_gate_exact(std::move(*state), fock::Squeeze{m, s.a, s.b});
    }
  }

  FockRunResult result;
  result.seed = seed;
  ModeMap map(ir.n_modes);
  OutcomeTable outcomes;

  auto record = [&](const std::string& label, MeasurementKind kind, const std::vector<int>& modes,
                    Vector outcome, double prob, bool no_absorption,
                    std::optional<fock::FockState> next) {
    MeasurementRecord r;
    r.label = label;
    r.kind = kind;
    r.modes = modes;
    r.outcome = std::move(outcome);
    r.density_or_prob = prob;
    r.no_absorption = no_absorption;
    if (kind != MeasurementKind::vacuum_projection) outcomes[label] = r.outcome;
    result.records.push_back(std::move(r));
    state = std::move(next);
    map.remove(modes);
  };

  for (std::size_t i = 0; i < ir.nodes.size(); ++i) {
    const Node& node = ir.nodes[i];
    try {
      std::visit(
          [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, GateNode>) {
              state = fock::apply_gate_exact(std::move(*state),
                                             fock_gate(n, evaluate(n.params, outcomes), map));
            } else if constexpr (std::is_same_v<T, ChannelNode>) {
              state = fock::apply_channel_exact(std::move(*state),
                                                fock_channel(n, evaluate(n.params, outcomes), map));
            } else if constexpr (std::is_same_v<T, FeedforwardNode>) {
              std::visit(
                  [&](const auto& t) {
                    using U = std::decay_t<decltype(t)>;
                    const auto p = evaluate(t.params, outcomes);
                    if constexpr (std::is_same_v<U, GateNode>) {
                      state = fock::apply_gate_exact(std::move(*state), fock_gate(t, p, map));
                    } else {
                      state = fock::apply_channel_exact(std::move(*state), fock_channel(t, p, map));
                    }
                  },
                  n.target);
            } else if constexpr (std::is_same_v<T, MeasureNode>) {
              const auto idx = map.indices(n.modes);
              RngStream rng = RngStream::split(seed, options.shot, n.label);
              switch (n.kind) {
                case MeasureKind::homodyne: {
                  const Vector* f = forced_value(options.forced, n.label, 1);
                  const double x = f ? (*f)(0)
                                     : fock::sample_homodyne(*state, idx[0], n.angle, n.efficiency, rng);
                  auto c = fock::homodyne_condition(*state, idx[0], n.angle, n.efficiency, x);
                  record(n.label, MeasurementKind::homodyne, n.modes, Vector::Constant(1, x),
                         c.density_or_prob, false, std::move(c.state));
                  break;
                }
                case MeasureKind::heterodyne: {
                  const Vector* f = forced_value(options.forced, n.label, 2);
                  const Eigen::Vector2d v = f ? Eigen::Vector2d((*f)(0), (*f)(1))
                                              : fock::sample_heterodyne(*state, idx[0], rng);
                  auto c = fock::heterodyne_condition(*state, idx[0], v(0), v(1));
                  record(n.label, MeasurementKind::heterodyne, n.modes, Vector(v),
                         c.density_or_prob, false, std::move(c.state));
                  break;
                }
                case MeasureKind::vacproj: {
                  auto c = fock::threshold_condition(*state, idx, fock::ThresholdBranch::no_absorption);
                  result.post_selection_probability *= c.density_or_prob;
                  record(n.label, MeasurementKind::vacuum_projection, n.modes, Vector(),
                         c.density_or_prob, true, std::move(c.state));
                  break;
                }
              }
            } else {
              const auto idx = map.indices(n.modes);
              switch (n.kind) {
                case NonGaussianKind::kerr:
                  state = fock::apply_gate_exact(std::move(*state), fock::Kerr{idx[0], n.chi});
                  break;
                case NonGaussianKind::absorption: {
                  auto c = fock::threshold_condition(*state, idx, fock::ThresholdBranch::absorption);
                  result.post_selection_probability *= c.density_or_prob;
                  record(n.label, MeasurementKind::vacuum_projection, n.modes, Vector(),
                         c.density_or_prob, false, std::move(c.state));
                  break;
                }
                case NonGaussianKind::photon_count: {
                  RngStream rng = RngStream::split(seed, options.shot, n.label);
                  const Vector* f = forced_value(options.forced, n.label, 1);
                  const int count = f ? static_cast<int>(std::lround((*f)(0)))
                                      : fock::sample_photon_count(*state, idx[0], rng);
                  auto c = fock::photon_count_condition(*state, idx[0], count);
                  record(n.label, MeasurementKind::photon_count, n.modes,
                         Vector::Constant(1, count), c.density_or_prob, false, std::move(c.state));
                  break;
                }
              }
            }
          },
          node.body);
    } catch (const Error& e) {
      rethrow_with_context(e, node_context(i, node));
    }
    if (state) {
      const double h = fock::truncation_health(*state).metric();
      result.worst_health = std::max(result.worst_health, h);
      if (options.health_limit && h > *options.health_limit) {
        result.stopped_at = static_cast<int>(i);
        break;
      }
    }
  }
  result.final_state = std::move(state);
  result.surviving_modes = map.alive();
  return result;
}

unsigned default_workers() {
  if (const char* env = std::getenv("CVSIM_WORKERS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ShotStatistics run_shots(const CircuitIR& ir, std::uint64_t seed, std::size_t n_shots,
                         unsigned workers) {
  if (n_shots == 0) throw InvalidArgument("shot count must be positive");
  if (workers == 0) workers = default_workers();
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n_shots));

  struct Slot {
    std::vector<MeasurementRecord> records;
    double probability = 1.0;
  };
  std::vector<Slot> slots(n_shots);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::size_t error_shot = n_shots;
  std::exception_ptr error;

  auto work = [&] {
    for (std::size_t shot = next++; shot < n_shots; shot = next++) {
      try {
        RunOptions options;
        options.shot = shot;
        RunResult r = execute(ir, seed, options);
        slots[shot] = {std::move(r.records), r.post_selection_probability};
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (shot < error_shot) {
          error_shot = shot;
          error = std::current_exception();
        }
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  ShotStatistics stats;
  stats.seed = seed;
  stats.n_shots = n_shots;
  double prob = 0.0;
  for (const Slot& s : slots) {
    prob += s.probability;
    for (const MeasurementRecord& r : s.records) {
      Vector value = r.kind == MeasurementKind::vacuum_projection
                         ? Vector::Constant(1, r.density_or_prob)
                         : r.outcome;
      stats.labels[r.label].samples.push_back(std::move(value));
    }
  }
  stats.mean_post_selection_probability = prob / static_cast<double>(n_shots);
  for (auto& [label, l] : stats.labels) {
    const auto dim = l.samples.front().size();
    const auto n = static_cast<double>(l.samples.size());
    l.mean = Vector::Zero(dim);
    for (const Vector& v : l.samples) l.mean += v;
    l.mean /= n;
    l.cov = Matrix::Zero(dim, dim);
    for (const Vector& v : l.samples) {
      const Vector d = v - l.mean;
      l.cov += d * d.transpose();
    }
    if (l.samples.size() > 1) l.cov /= n - 1.0;
  }
  return stats;
}

}  // namespace cvsim
