#include "twinloop/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "twinloop/error.hpp"

namespace twinloop {

namespace {

std::string_view kind_name(MatchKind k) {
  switch (k) {
    case MatchKind::Open: return "open";
    case MatchKind::Close: return "close";
    case MatchKind::Increase: return "increase";
    case MatchKind::Decrease: return "decrease";
    case MatchKind::Hold: return "hold";
  }
  return "open";
}

}  // namespace

ActionKey match_key(const Action& action, double pump_power_before) {
  switch (action.command) {
    case Command::Open: return {action.actuator, MatchKind::Open};
    case Command::Close: return {action.actuator, MatchKind::Close};
    case Command::SetPower:
      if (action.power > pump_power_before) return {action.actuator, MatchKind::Increase};
      if (action.power < pump_power_before) return {action.actuator, MatchKind::Decrease};
      return {action.actuator, MatchKind::Hold};
  }
  return {action.actuator, MatchKind::Open};
}

std::string format_key(const ActionKey& key) {
  return fmt::format("{} - {}", key.actuator, kind_name(key.kind));
}

ActionKey parse_key(const std::string& text) {
  const auto sep = text.find(" - ");
  if (sep == std::string::npos) throw ConfigError("trace", fmt::format("bad action key '{}'", text));
  const std::string actuator = text.substr(0, sep);
  const std::string kind = text.substr(sep + 3);
  for (MatchKind k : {MatchKind::Open, MatchKind::Close, MatchKind::Increase, MatchKind::Decrease,
                      MatchKind::Hold}) {
    if (kind == kind_name(k)) return {actuator, k};
  }
  throw ConfigError("trace", fmt::format("bad action kind in '{}'", text));
}

std::vector<DecisionLog> decision_logs(const std::vector<IterationRecord>& records) {
  std::vector<DecisionLog> logs;
  for (const auto& r : records) {
    if (r.decision_point >= static_cast<int>(logs.size())) {
      logs.resize(static_cast<std::size_t>(r.decision_point) + 1);
    }
    DecisionLog& log = logs[static_cast<std::size_t>(r.decision_point)];
    log.tokens += r.tokens_used;
    log.reprompts = std::max(log.reprompts, r.reprompt_count_this_point);
    if (r.executed) {
      for (const auto& a : r.executed_actions) {
        log.executed.push_back(match_key(a, r.plant_state_before.pump_power));
      }
    }
  }
  return logs;
}

RunMetrics score_logs(const std::vector<DecisionLog>& logs, const ExpectedTrace& expected,
                      const PlantTopology& topology) {
  if (expected.decision_points.size() > logs.size()) {
    throw TraceMismatch(fmt::format("trace has {} decision points, run only {}",
                                    expected.decision_points.size(), logs.size()));
  }
  RunMetrics m;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const DecisionLog& log = logs[i];
    m.n_reprompts += log.reprompts;
    m.tokens_total += log.tokens;

    std::map<ActionKey, int> pending;
    if (i < expected.decision_points.size()) {
      for (const auto& k : expected.decision_points[i]) ++pending[k];
    }
    for (const auto& k : pending) m.n_expected_actions += k.second;
    m.n_actions += static_cast<int>(log.executed.size());

    for (const auto& k : log.executed) {
      auto it = pending.find(k);
      if (it != pending.end() && it->second > 0) {
        --it->second;
        ++m.n_correct;
      } else if (topology.is_pump(k.actuator)) {
        ++m.n_incorrect_pump;
      } else {
        ++m.n_incorrect_valve;
      }
    }
    for (const auto& [k, left] : pending) {
      if (topology.is_pump(k.actuator)) m.n_missed_pump += left;
      else m.n_missed_valve += left;
    }
  }
  return m;
}

RunMetrics score(const std::vector<IterationRecord>& records, const ExpectedTrace& expected,
                 const PlantTopology& topology) {
  return score_logs(decision_logs(records), expected, topology);
}

ExpectedTrace trace_from_records(const std::vector<IterationRecord>& records) {
  ExpectedTrace trace;
  for (const auto& log : decision_logs(records)) trace.decision_points.push_back(log.executed);
  return trace;
}

void save_trace(const ExpectedTrace& trace, const std::filesystem::path& path) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& point : trace.decision_points) {
    nlohmann::json keys = nlohmann::json::array();
    for (const auto& k : point) keys.push_back(format_key(k));
    points.push_back(keys);
  }
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << nlohmann::json{{"decision_points", points}}.dump(2) << '\n';
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

ExpectedTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read {}", path.string()));
  ExpectedTrace trace;
  try {
    const auto json = nlohmann::json::parse(in);
    for (const auto& point : json.at("decision_points")) {
      std::vector<ActionKey> keys;
      for (const auto& k : point) keys.push_back(parse_key(k.get<std::string>()));
      trace.decision_points.push_back(std::move(keys));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("trace", fmt::format("{}: {}", path.string(), e.what()));
  }
  return trace;
}

std::string format_metrics_table(const RunMetrics& m, const std::string& column) {
  std::string out;
  auto row = [&](std::string_view label, const std::string& value) {
    out += fmt::format("{:<36}{:>12}\n", label, value);
  };
  row("Metrics", column);
  out += std::string(48, '-') + "\n";
  row("Actions Summary", "");
  row("  No. of Actions", std::to_string(m.n_actions));
  row("  No. of Expected Actions", std::to_string(m.n_expected_actions));
  row("Action Quality", "");
  row("  No. of Correct Actions", std::to_string(m.n_correct));
  row("  No. of Incorrect Valve Actions", std::to_string(m.n_incorrect_valve));
  row("  No. of Incorrect Pump Actions", std::to_string(m.n_incorrect_pump));
  row("  No. of Missed Valve Actions", std::to_string(m.n_missed_valve));
  row("  No. of Missed Pump Actions", std::to_string(m.n_missed_pump));
  row("Efficiency", "");
  row("  No. of Reprompts", std::to_string(m.n_reprompts));
  row("Token Usage", "");
  row("  No. of Tokens (K)", fmt::format("{:.1f}", static_cast<double>(m.tokens_total) / 1000.0));
  return out;
}

}  // namespace twinloop
