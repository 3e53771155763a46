#include "cvsim/run_result.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include "cvsim/error.hpp"

namespace cvsim {

using nlohmann::ordered_json;

namespace {

ordered_json vector_json(const Vector& v) {
  ordered_json j;
  j["length"] = v.size();
  j["data"] = std::vector<double>(v.data(), v.data() + v.size());
  return j;
}

ordered_json matrix_json(const Matrix& m) {
  ordered_json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  j["data"] = std::move(data);
  return j;
}

ordered_json records_json(const std::vector<MeasurementRecord>& records) {
  ordered_json out = ordered_json::array();
  for (const MeasurementRecord& r : records) {
    ordered_json j;
    j["label"] = r.label;
    j["kind"] = to_string(r.kind);
    j["modes"] = r.modes;
    j["outcome"] = std::vector<double>(r.outcome.data(), r.outcome.data() + r.outcome.size());
    j["no_absorption"] = r.no_absorption;
    j["density_or_prob"] = r.density_or_prob;
    out.push_back(std::move(j));
  }
  return out;
}

ordered_json outcomes_json(const std::vector<MeasurementRecord>& records) {
  ordered_json out = ordered_json::object();
  for (const MeasurementRecord& r : records) {
    if (r.kind == MeasurementKind::vacuum_projection) continue;
    out[r.label] = std::vector<double>(r.outcome.data(), r.outcome.data() + r.outcome.size());
  }
  return out;
}

ordered_json state_json(const Vector& mean, const Matrix& cov, const std::vector<int>& modes) {
  ordered_json j;
  j["n_modes"] = modes.size();
  j["surviving_modes"] = modes;
  j["mean"] = vector_json(mean);
  j["cov"] = matrix_json(cov);
  return j;
}

[[noreturn]] void schema(const std::string& what) {
  throw InvalidArgument(fmt::format("run document: {}", what));
}

template <class T>
T field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) schema(fmt::format("missing field '{}'", key));
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    schema(fmt::format("field '{}': {}", key, e.what()));
  }
}

MeasurementKind kind_from(const std::string& s) {
  for (MeasurementKind k : {MeasurementKind::homodyne, MeasurementKind::heterodyne,
                            MeasurementKind::general_dyne, MeasurementKind::vacuum_projection,
                            MeasurementKind::photon_count}) {
    if (s == to_string(k)) return k;
  }
  schema(fmt::format("unknown measurement kind '{}'", s));
}

}  // namespace

std::string to_json(const RunResult& result, int indent) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["backend"] = "gaussian";
  j["seed"] = result.seed;
  j["post_selection_probability"] = result.post_selection_probability;
  j["records"] = records_json(result.records);
  j["outcomes"] = outcomes_json(result.records);
  if (result.final_state) {
    j["final_state"] =
        state_json(result.final_state->mean(), result.final_state->cov(), result.surviving_modes);
  } else {
    j["final_state"] = nullptr;
  }
  return j.dump(indent) + "\n";
}

std::string to_json(const FockRunResult& result, int cutoff, int indent) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["backend"] = "fock";
  j["seed"] = result.seed;
  j["post_selection_probability"] = result.post_selection_probability;
  j["records"] = records_json(result.records);
  j["outcomes"] = outcomes_json(result.records);
  if (result.final_state) {
    const fock::Moments m = fock::moments(*result.final_state);
    j["final_state"] = state_json(m.mean, m.cov, result.surviving_modes);
    const fock::TruncationHealth h = fock::truncation_health(*result.final_state);
    ordered_json t;
    t["cutoff"] = cutoff;
    t["dimension"] = result.final_state->basis.dim();
    t["trace"] = result.final_state->trace();
    t["top_level_population"] = h.top_level_population;
    t["top_shell_population"] = h.top_shell_population;
    t["truncation_loss"] = h.truncation_loss;
    j["truncation"] = std::move(t);
  } else {
    j["final_state"] = nullptr;
  }
  return j.dump(indent) + "\n";
}

std::string to_json(const SimulatabilityReport& report, int indent) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["verdict"] = to_string(report.verdict);
  if (report.matched_row) {
    j["matched_row"] = *report.matched_row;
    j["row_description"] = row_description(*report.matched_row);
  } else {
    j["matched_row"] = nullptr;
  }
  ordered_json w = ordered_json::array();
  for (const Witness& x : report.witnesses) {
    w.push_back({{"node", x.node}, {"reason", x.reason}, {"line", x.line}});
  }
  j["witnesses"] = std::move(w);
  return j.dump(indent) + "\n";
}

std::string to_json(const ShotStatistics& stats, int indent) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = stats.seed;
  j["shots"] = stats.n_shots;
  j["mean_post_selection_probability"] = stats.mean_post_selection_probability;
  ordered_json labels = ordered_json::object();
  for (const auto& [label, l] : stats.labels) {
    ordered_json e;
    e["count"] = l.samples.size();
    e["mean"] = vector_json(l.mean);
    e["cov"] = matrix_json(l.cov);
    labels[label] = std::move(e);
  }
  j["labels"] = std::move(labels);
  return j.dump(indent) + "\n";
}

RunResult run_result_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    schema(e.what());
  }
  if (field<int>(j, "schema_version") != kSchemaVersion) schema("unsupported schema_version");
  if (field<std::string>(j, "backend") != "gaussian") schema("not a Gaussian run");
  RunResult r;
  r.seed = field<std::uint64_t>(j, "seed");
  r.post_selection_probability = field<double>(j, "post_selection_probability");
  for (const auto& e : field<nlohmann::json>(j, "records")) {
    MeasurementRecord rec;
    rec.label = field<std::string>(e, "label");
    rec.kind = kind_from(field<std::string>(e, "kind"));
    rec.modes = field<std::vector<int>>(e, "modes");
    const auto outcome = field<std::vector<double>>(e, "outcome");
    rec.outcome = Eigen::Map<const Vector>(outcome.data(), static_cast<Eigen::Index>(outcome.size()));
    rec.no_absorption = field<bool>(e, "no_absorption");
    rec.density_or_prob = field<double>(e, "density_or_prob");
    r.records.push_back(std::move(rec));
  }
  const auto& fs = field<nlohmann::json>(j, "final_state");
  if (!fs.is_null()) {
    r.surviving_modes = field<std::vector<int>>(fs, "surviving_modes");
    const auto mean = field<nlohmann::json>(fs, "mean");
    const auto cov = field<nlohmann::json>(fs, "cov");
    const auto n = field<Eigen::Index>(mean, "length");
    const auto rows = field<Eigen::Index>(cov, "rows");
    const auto cols = field<Eigen::Index>(cov, "cols");
    const auto md = field<std::vector<double>>(mean, "data");
    const auto cd = field<std::vector<double>>(cov, "data");
    if (static_cast<Eigen::Index>(md.size()) != n || rows != n || cols != n ||
        static_cast<Eigen::Index>(cd.size()) != rows * cols ||
        static_cast<std::size_t>(n) != 2 * r.surviving_modes.size()) {
      schema("final_state dimensions are inconsistent");
    }
    Vector m = Eigen::Map<const Vector>(md.data(), n);
    Matrix c(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index k = 0; k < cols; ++k) c(i, k) = cd[static_cast<std::size_t>(i * cols + k)];
    }
    try {
      r.final_state = GaussianState(std::move(m), std::move(c));
    } catch (const Error& e) {
      schema(e.what());
    }
  }
  return r;
}

}  // namespace cvsim
