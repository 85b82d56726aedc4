#include "twinloop/csv_export.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "twinloop/error.hpp"

namespace twinloop {

namespace {

std::string num(double v) { return fmt::format("{}", v); }

std::string join_row(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += csv_field(fields[i]);
  }
  line += '\n';
  return line;
}

bool fault_on(const PlantState& s, FaultKind kind) {
  for (const auto& f : s.active_faults) {
    if (f.kind == kind && fault_active(f, s.time)) return true;
  }
  return false;
}

std::vector<std::string> state_fields(const PlantState& s, const PlantTopology& topo) {
  std::vector<std::string> row{num(s.time)};
  for (const auto& t : topo.tanks) row.push_back(num(s.levels.at(t.id)));
  for (const auto& v : topo.valves) row.push_back(s.valve_open.at(v.id) ? "1" : "0");
  row.push_back(num(s.pump_power));
  row.push_back(num(read_sensors(s, topo).volume_flow_rate));
  for (FaultKind k : {FaultKind::Clogging, FaultKind::Leakage, FaultKind::PumpDegradation}) {
    row.push_back(fault_on(s, k) ? "1" : "0");
  }
  row.push_back(s.overflowed.empty() ? "0" : "1");
  return row;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : path_(path), out_(path) {
    if (!out_) throw IoError(fmt::format("cannot write {}", path.string()));
  }
  void row(const std::vector<std::string>& fields) { out_ << join_row(fields); }
  void close() {
    out_.close();
    if (!out_) throw IoError(fmt::format("failed writing {}", path_.string()));
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

std::string violation_codes(const std::vector<ValidationViolation>& violations) {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += format_violation(v);
  }
  return out;
}

double to_double(const std::string& s, const std::filesystem::path& path) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw IoError(fmt::format("{}: bad number '{}'", path.string(), s));
  }
  return v;
}

long to_long(const std::string& s, const std::filesystem::path& path) {
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw IoError(fmt::format("{}: bad integer '{}'", path.string(), s));
  }
  return v;
}

std::size_t column(const CsvRow& header, std::string_view name, const std::filesystem::path& path) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw IoError(fmt::format("{}: missing column {}", path.string(), name));
}

}  // namespace

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> plant_csv_header(const PlantTopology& topology) {
  std::vector<std::string> h{"time"};
  for (const auto& t : topology.tanks) h.push_back("level_" + t.id);
  for (const auto& v : topology.valves) h.push_back(v.id);
  h.insert(h.end(), {"pump_power", "volume_flow_rate", "fault_clogging", "fault_leakage",
                     "fault_pump_degradation", "overflow"});
  return h;
}

std::vector<std::string> twin_csv_header(const PlantTopology& topology) {
  std::vector<std::string> h{"iteration"};
  for (auto& c : plant_csv_header(topology)) h.push_back(std::move(c));
  return h;
}

std::vector<std::string> agent_csv_header() {
  return {"iteration",         "decision_point", "time",     "backend_id",
          "prompt_tokens",     "completion_tokens", "reprompt_count", "verdict",
          "forced",            "executed",       "pump_power_before", "actions",
          "violations",        "cost"};
}

void export_csv(const RunResult& result, const PlantTopology& topology,
                const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));

  CsvWriter plant(out_dir / kPlantCsv);
  plant.row(plant_csv_header(topology));
  for (const auto& s : result.plant_log) plant.row(state_fields(s, topology));
  plant.close();

  CsvWriter twin(out_dir / kTwinCsv);
  twin.row(twin_csv_header(topology));
  for (const auto& r : result.records) {
    for (const auto& s : r.verdict.prediction.trajectory) {
      std::vector<std::string> row{std::to_string(r.iteration)};
      for (auto& f : state_fields(s, topology)) row.push_back(std::move(f));
      twin.row(row);
    }
  }
  twin.close();

  CsvWriter agent(out_dir / kAgentCsv);
  agent.row(agent_csv_header());
  for (const auto& r : result.records) {
    std::string verdict = r.verdict.valid ? "valid" : "invalid";
    const ActionList& actions = r.executed ? r.executed_actions : r.proposal.actions;
    agent.row({std::to_string(r.iteration), std::to_string(r.decision_point),
               num(r.plant_state_before.time), r.proposal.backend_id,
               std::to_string(r.proposal.prompt_tokens),
               std::to_string(r.proposal.completion_tokens),
               std::to_string(r.reprompt_count_this_point), verdict, r.forced ? "1" : "0",
               r.executed ? "1" : "0", num(r.plant_state_before.pump_power), join_actions(actions),
               violation_codes(r.verdict.violations), num(r.verdict.cost)});
  }
  agent.close();
}

std::vector<CsvRow> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  bool quoted = false;
  bool pending = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      pending = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      pending = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      pending = false;
    } else {
      field += c;
      pending = true;
    }
  }
  if (quoted) throw IoError(fmt::format("{}: unterminated quoted field", path.string()));
  if (pending) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::map<std::string, std::vector<double>> read_level_series(const std::filesystem::path& path,
                                                             const PlantTopology& topology) {
  const auto rows = read_csv(path);
  if (rows.empty()) throw IoError(fmt::format("{}: empty file", path.string()));
  std::map<std::string, std::vector<double>> series;
  for (const auto& t : topology.tanks) {
    const std::size_t col = column(rows[0], "level_" + t.id, path);
    auto& out = series[t.id];
    for (std::size_t i = 1; i < rows.size(); ++i) out.push_back(to_double(rows[i].at(col), path));
  }
  return series;
}

std::vector<DecisionLog> read_decision_logs(const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty()) throw IoError(fmt::format("{}: empty file", path.string()));
  const CsvRow& h = rows[0];
  const auto c_point = column(h, "decision_point", path);
  const auto c_prompt = column(h, "prompt_tokens", path);
  const auto c_completion = column(h, "completion_tokens", path);
  const auto c_reprompt = column(h, "reprompt_count", path);
  const auto c_executed = column(h, "executed", path);
  const auto c_power = column(h, "pump_power_before", path);
  const auto c_actions = column(h, "actions", path);

  std::vector<DecisionLog> logs;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const CsvRow& r = rows[i];
    if (r.size() != h.size()) {
      throw IoError(fmt::format("{}: row {} has {} fields, expected {}", path.string(), i,
                                r.size(), h.size()));
    }
    const long point = to_long(r[c_point], path);
    if (point < 0) throw IoError(fmt::format("{}: negative decision point", path.string()));
    if (point >= static_cast<long>(logs.size())) logs.resize(static_cast<std::size_t>(point) + 1);
    DecisionLog& log = logs[static_cast<std::size_t>(point)];
    log.tokens += static_cast<std::size_t>(to_long(r[c_prompt], path) + to_long(r[c_completion], path));
    log.reprompts = std::max(log.reprompts, static_cast<int>(to_long(r[c_reprompt], path)));
    if (r[c_executed] != "1" || r[c_actions].empty()) continue;
    const double before = to_double(r[c_power], path);
    std::string joined = r[c_actions];
    for (auto& ch : joined) {
      if (ch == ';') ch = '\n';
    }
    try {
      for (const auto& a : parse_actions(joined)) log.executed.push_back(match_key(a, before));
    } catch (const BackendError& e) {
      throw IoError(fmt::format("{}: row {}: {}", path.string(), i, e.what()));
    }
  }
  return logs;
}

}  // namespace twinloop
