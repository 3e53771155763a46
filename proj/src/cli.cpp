#include "cvsim/cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cvsim/bench.hpp"
#include "cvsim/circuit.hpp"
#include "cvsim/classifier.hpp"
#include "cvsim/error.hpp"
#include "cvsim/executor.hpp"
#include "cvsim/fock.hpp"
#include "cvsim/run_result.hpp"

namespace cvsim {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Config {
  std::string input;
  std::uint64_t seed = 0;
  std::size_t shots = 1000;
  unsigned workers = 0;
  std::string backend = "gaussian";
  int cutoff = 20;
  int max_photons = -1;
  double tol = 1e-6;
  double health = fock::kDefaultHealthThreshold;
  std::string format = "human";
  std::vector<std::string> forces;
  std::vector<int> sizes{64, 128, 256, 512, 1024};
  int gates_per_mode = 10;
  int repeats = 3;
};

bool structured(const Config& c) { return c.format == "structured"; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(fmt::format("cannot read '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::set<std::string> numeric_labels(const CircuitIR& ir) {
  std::set<std::string> out;
  for (const Node& n : ir.nodes) {
    if (const auto* m = std::get_if<MeasureNode>(&n.body)) {
      if (m->kind != MeasureKind::vacproj) out.insert(m->label);
    } else if (const auto* g = std::get_if<NonGaussianNode>(&n.body)) {
      if (g->kind == NonGaussianKind::photon_count) out.insert(g->label);
    }
  }
  return out;
}

OutcomeTable parse_forces(const std::vector<std::string>& forces, const CircuitIR& ir) {
  const auto labels = numeric_labels(ir);
  OutcomeTable table;
  for (const std::string& f : forces) {
    const auto eq = f.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw UsageError(fmt::format("--force expects label=value[,value], got '{}'", f));
    }
    const std::string label = f.substr(0, eq);
    if (!labels.count(label)) {
      throw UsageError(fmt::format("--force: circuit has no measurement outcome '{}'", label));
    }
    std::vector<double> values;
    std::string_view rest(f);
    rest.remove_prefix(eq + 1);
    while (true) {
      const auto comma = rest.find(',');
      const std::string_view item = rest.substr(0, comma);
      double v = 0.0;
      const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
      if (res.ec != std::errc() || res.ptr != item.data() + item.size() || !std::isfinite(v)) {
        throw UsageError(fmt::format("--force: '{}' is not a number", item));
      }
      values.push_back(v);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    table[label] = Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  }
  return table;
}

std::string row(const Vector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += fmt::format("{:>14.6g}", v(i));
  return out;
}

void print_state(std::ostream& out, const Vector& mean, const Matrix& cov,
                 const std::vector<int>& modes) {
  fmt::print(out, "final state: modes {}\n", fmt::join(modes, " "));
  fmt::print(out, "mean\n  {}\n", row(mean));
  fmt::print(out, "covariance\n");
  for (Eigen::Index r = 0; r < cov.rows(); ++r) fmt::print(out, "  {}\n", row(cov.row(r).transpose()));
}

void print_records(std::ostream& out, const std::vector<MeasurementRecord>& records) {
  if (records.empty()) {
    fmt::print(out, "measurements: none\n");
    return;
  }
  fmt::print(out, "measurements\n");
  fmt::print(out, "  {:<12} {:<18} {:<8} {:>14} {:>14}\n", "label", "kind", "modes", "outcome",
             "density/prob");
  for (const MeasurementRecord& r : records) {
    std::string outcome;
    if (r.kind == MeasurementKind::vacuum_projection) {
      outcome = r.no_absorption ? "no_absorption" : "absorption";
    } else {
      std::vector<std::string> parts;
      for (Eigen::Index i = 0; i < r.outcome.size(); ++i) {
        parts.push_back(fmt::format("{:.6g}", r.outcome(i)));
      }
      outcome = fmt::format("{}", fmt::join(parts, ","));
    }
    fmt::print(out, "  {:<12} {:<18} {:<8} {:>14} {:>14.6g}\n", r.label, to_string(r.kind),
               fmt::format("{}", fmt::join(r.modes, ",")), outcome, r.density_or_prob);
  }
}

CircuitIR load(const Config& c) { return parse(read_file(c.input)); }

void require_fock_size(const CircuitIR& ir) {
  if (ir.n_modes > 3) {
    throw UsageError(fmt::format("the Fock backend supports at most 3 modes, circuit has {}",
                                 ir.n_modes));
  }
}

FockRunOptions fock_options(const Config& c, OutcomeTable forced) {
  FockRunOptions o;
  o.cutoff = c.cutoff;
  if (c.max_photons >= 0) o.max_total = c.max_photons;
  o.forced = std::move(forced);
  return o;
}

void refuse_unless_simulatable(const CircuitIR& ir, const char* hint) {
  const SimulatabilityReport report = classify(ir);
  if (report.verdict == Verdict::simulatable) return;
  std::string what = fmt::format("circuit is {}:", to_string(report.verdict));
  for (const Witness& w : report.witnesses) {
    what += fmt::format("\n  {} (line {}): {}", w.node, w.line, w.reason);
  }
  what += hint;
  throw RefusalError(what, -1);
}

int cmd_run(const Config& c, std::ostream& out) {
  const CircuitIR ir = load(c);
  OutcomeTable forced = parse_forces(c.forces, ir);
  if (c.backend == "fock") {
    require_fock_size(ir);
    const FockRunResult r = execute_fock(ir, c.seed, fock_options(c, std::move(forced)));
    if (structured(c)) {
      out << to_json(r, c.cutoff);
      return kExitOk;
    }
    fmt::print(out, "backend: fock (cutoff {})\nseed: {}\npost-selection probability: {:.6g}\n",
               c.cutoff, c.seed, r.post_selection_probability);
    print_records(out, r.records);
    if (r.final_state) {
      const fock::Moments m = fock::moments(*r.final_state);
      print_state(out, m.mean, m.cov, r.surviving_modes);
      const fock::TruncationHealth h = fock::truncation_health(*r.final_state);
      fmt::print(out, "truncation health: {:.6g} (trace {:.6g})\n", h.metric(),
                 r.final_state->trace());
    } else {
      fmt::print(out, "final state: all modes measured\n");
    }
    return kExitOk;
  }
  refuse_unless_simulatable(ir, "\nrerun with --backend fock for small non-Gaussian circuits");
  RunOptions options;
  options.forced = std::move(forced);
  const RunResult r = execute(ir, c.seed, options);
  if (structured(c)) {
    out << to_json(r);
    return kExitOk;
  }
  fmt::print(out, "backend: gaussian\nseed: {}\npost-selection probability: {:.6g}\n", c.seed,
             r.post_selection_probability);
  print_records(out, r.records);
  if (r.final_state) {
    print_state(out, r.final_state->mean(), r.final_state->cov(), r.surviving_modes);
  } else {
    fmt::print(out, "final state: all modes measured\n");
  }
  return kExitOk;
}

int cmd_classify(const Config& c, std::ostream& out) {
  const SimulatabilityReport report = classify(load(c));
  if (structured(c)) {
    out << to_json(report);
    return kExitOk;
  }
  fmt::print(out, "verdict: {}\n", to_string(report.verdict));
  if (report.matched_row) {
    fmt::print(out, "table row: {} ({})\n", *report.matched_row, row_description(*report.matched_row));
  } else {
    fmt::print(out, "table row: none\n");
  }
  if (report.witnesses.empty()) {
    fmt::print(out, "witnesses: none\n");
  } else {
    fmt::print(out, "witnesses\n");
    for (const Witness& w : report.witnesses) {
      fmt::print(out, "  {:<10} line {:<4} {}\n", w.node, w.line, w.reason);
    }
  }
  return kExitOk;
}

int cmd_sample(const Config& c, std::ostream& out) {
  const CircuitIR ir = load(c);
  if (!c.forces.empty()) throw UsageError("--force is not supported by sample");
  refuse_unless_simulatable(ir, "");
  const ShotStatistics stats = run_shots(ir, c.seed, c.shots, c.workers);
  if (structured(c)) {
    out << to_json(stats);
    return kExitOk;
  }
  fmt::print(out, "seed: {}\nshots: {}\nmean post-selection probability: {:.6g}\n", c.seed,
             stats.n_shots, stats.mean_post_selection_probability);
  for (const auto& [label, l] : stats.labels) {
    fmt::print(out, "{}\n  mean       {}\n", label, row(l.mean));
    for (Eigen::Index r = 0; r < l.cov.rows(); ++r) {
      fmt::print(out, "  {:<10} {}\n", r == 0 ? "covariance" : "", row(l.cov.row(r).transpose()));
    }
  }
  return kExitOk;
}

int cmd_compare(const Config& c, std::ostream& out) {
  const CircuitIR ir = load(c);
  require_fock_size(ir);
  refuse_unless_simulatable(ir, "\ncompare needs a circuit both backends can run");
  RunOptions options;
  options.forced = parse_forces(c.forces, ir);
  const RunResult g = execute(ir, c.seed, options);
  // The oracle replays the Gaussian outcomes so both follow the same branch.
  OutcomeTable replay = g.outcomes();
  for (auto it = replay.begin(); it != replay.end();) {
    it = it->second.size() == 0 ? replay.erase(it) : std::next(it);
  }
  const FockRunResult f = execute_fock(ir, c.seed, fock_options(c, replay));

  double record_dev = 0.0;
  nlohmann::ordered_json recs = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < g.records.size(); ++i) {
    const double dev = std::abs(g.records[i].density_or_prob - f.records[i].density_or_prob);
    record_dev = std::max(record_dev, dev);
    recs.push_back({{"label", g.records[i].label},
                    {"gaussian", g.records[i].density_or_prob},
                    {"fock", f.records[i].density_or_prob},
                    {"deviation", dev}});
  }
  std::optional<fock::ComparisonReport> report;
  if (g.final_state && f.final_state) {
    report = fock::compare(*g.final_state, *f.final_state, c.tol, c.health);
  }
  const double prob_dev = std::abs(g.post_selection_probability - f.post_selection_probability);
  std::string status = "pass";
  if (report && report->status == fock::ComparisonStatus::inconclusive) {
    status = "inconclusive";
  } else if ((report && report->status == fock::ComparisonStatus::fail) || record_dev > c.tol ||
             prob_dev > c.tol) {
    status = "fail";
  }

  if (structured(c)) {
    nlohmann::ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["seed"] = c.seed;
    j["cutoff"] = c.cutoff;
    j["tolerance"] = c.tol;
    j["health_threshold"] = c.health;
    j["records"] = std::move(recs);
    j["post_selection_deviation"] = prob_dev;
    if (report) {
      j["max_mean_deviation"] = report->max_mean_deviation;
      j["max_cov_deviation"] = report->max_cov_deviation;
      j["truncation_health"] = report->health.metric();
    }
    j["status"] = status;
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  fmt::print(out, "gaussian vs fock (cutoff {}), seed {}\n", c.cutoff, c.seed);
  for (std::size_t i = 0; i < g.records.size(); ++i) {
    fmt::print(out, "  {:<12} gaussian {:>14.6g}  fock {:>14.6g}\n", g.records[i].label,
               g.records[i].density_or_prob, f.records[i].density_or_prob);
  }
  fmt::print(out, "post-selection deviation: {:.3g}\n", prob_dev);
  if (report) {
    fmt::print(out, "max mean deviation: {:.3g}\nmax covariance deviation: {:.3g}\n",
               report->max_mean_deviation, report->max_cov_deviation);
    fmt::print(out, "truncation health: {:.3g} (threshold {:.3g})\n", report->health.metric(),
               c.health);
  }
  fmt::print(out, "status: {} (tolerance {:.3g})\n", status, c.tol);
  return kExitOk;
}

int cmd_bench(const Config& c, std::ostream& out) {
  for (int n : c.sizes) {
    if (n < 2) throw UsageError("bench sizes must be at least 2");
  }
  if (c.sizes.size() < 2) throw UsageError("bench needs at least two sizes");
  const BenchReport r = run_bench(c.sizes, c.gates_per_mode, c.repeats, c.seed);
  if (structured(c)) {
    nlohmann::ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["gates_per_mode"] = c.gates_per_mode;
    nlohmann::ordered_json pts = nlohmann::ordered_json::array();
    for (const BenchPoint& p : r.points) {
      pts.push_back({{"n_modes", p.n_modes}, {"n_gates", p.n_gates}, {"seconds", p.seconds}});
    }
    j["points"] = std::move(pts);
    j["slope"] = r.slope;
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  fmt::print(out, "{:>8} {:>8} {:>14}\n", "modes", "gates", "seconds");
  for (const BenchPoint& p : r.points) {
    fmt::print(out, "{:>8} {:>8} {:>14.6g}\n", p.n_modes, p.n_gates, p.seconds);
  }
  fmt::print(out, "log-log slope: {:.4g}\n", r.slope);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Config c;
  CLI::App app{"Gaussian optical circuit simulator"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto common = [&](CLI::App* sub) {
    sub->add_option("input", c.input, "circuit source file")->required();
    sub->add_option("--seed", c.seed, "master seed")->capture_default_str();
    sub->add_option("--format", c.format, "human or structured")
        ->check(CLI::IsMember({"human", "structured"}))
        ->capture_default_str();
  };
  auto fock_flags = [&](CLI::App* sub) {
    sub->add_option("--cutoff", c.cutoff, "Fock levels per mode")
        ->check(CLI::Range(2, 200))
        ->capture_default_str();
    sub->add_option("--max-photons", c.max_photons, "cap on the total photon number")
        ->check(CLI::NonNegativeNumber);
  };

  CLI::App* run = app.add_subcommand("run", "execute a circuit and print the final moments");
  common(run);
  run->add_option("--backend", c.backend, "gaussian or fock")
      ->check(CLI::IsMember({"gaussian", "fock"}))
      ->capture_default_str();
  fock_flags(run);
  run->add_option("--force", c.forces, "replay an outcome: label=value[,value]");

  CLI::App* cls = app.add_subcommand("classify", "static simulatability analysis");
  common(cls);

  CLI::App* sample = app.add_subcommand("sample", "Monte-Carlo shots with outcome statistics");
  common(sample);
  sample->add_option("--shots", c.shots, "number of shots")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sample->add_option("--workers", c.workers, "worker threads (default: CVSIM_WORKERS or all cores)");

  CLI::App* cmp = app.add_subcommand("compare", "check the Gaussian engine against the Fock oracle");
  common(cmp);
  fock_flags(cmp);
  cmp->add_option("--force", c.forces, "replay an outcome: label=value[,value]");
  cmp->add_option("--tol", c.tol, "absolute tolerance")->capture_default_str();
  cmp->add_option("--health", c.health, "truncation-health threshold")->capture_default_str();

  CLI::App* bench = app.add_subcommand("bench", "scaling benchmark of the Gaussian engine");
  bench->add_option("--sizes", c.sizes, "mode counts")->delimiter(',')->capture_default_str();
  bench->add_option("--gates-per-mode", c.gates_per_mode)->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--repeats", c.repeats)->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--seed", c.seed, "circuit seed")->capture_default_str();
  bench->add_option("--format", c.format, "human or structured")
      ->check(CLI::IsMember({"human", "structured"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (run->parsed()) return cmd_run(c, out);
    if (cls->parsed()) return cmd_classify(c, out);
    if (sample->parsed()) return cmd_sample(c, out);
    if (cmp->parsed()) return cmd_compare(c, out);
    if (bench->parsed()) return cmd_bench(c, out);
  } catch (const UsageError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const ParseError& e) {
    fmt::print(err, "{}:{}\n", c.input, e.what());
    return kExitParse;
  } catch (const RefusalError& e) {
    fmt::print(err, "refused: {}\n", e.what());
    return kExitRefused;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace cvsim
