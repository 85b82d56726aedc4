#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "twinloop/control_loop.hpp"

namespace twinloop {

struct RunMetrics {
  int n_actions = 0;
  int n_expected_actions = 0;
  int n_correct = 0;
  int n_incorrect_valve = 0;
  int n_incorrect_pump = 0;
  int n_missed_valve = 0;
  int n_missed_pump = 0;
  int n_reprompts = 0;
  std::size_t tokens_total = 0;

  /// Actions = Correct + Incorrect and Expected = Correct + Missed.
  bool identities_hold() const {
    return n_actions == n_correct + n_incorrect_valve + n_incorrect_pump &&
           n_expected_actions == n_correct + n_missed_valve + n_missed_pump;
  }

  friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

/// Pump commands are compared by direction, not by value.
enum class MatchKind { Open, Close, Increase, Decrease, Hold };

struct ActionKey {
  std::string actuator;
  MatchKind kind = MatchKind::Open;

  friend auto operator<=>(const ActionKey&, const ActionKey&) = default;
};

ActionKey match_key(const Action& action, double pump_power_before);
std::string format_key(const ActionKey& key);
/// Throws ConfigError on text that is not "<actuator> - open|close|increase|decrease|hold".
ActionKey parse_key(const std::string& text);

/// Expected actions per decision point.
struct ExpectedTrace {
  std::vector<std::vector<ActionKey>> decision_points;
};

/// What one decision point of a run did, as far as scoring is concerned.
struct DecisionLog {
  std::vector<ActionKey> executed;
  int reprompts = 0;
  std::size_t tokens = 0;
};

std::vector<DecisionLog> decision_logs(const std::vector<IterationRecord>& records);

/// Order-insensitive multiset matching within each decision point.
/// Throws TraceMismatch if the trace has more decision points than the log.
RunMetrics score_logs(const std::vector<DecisionLog>& logs, const ExpectedTrace& expected,
                      const PlantTopology& topology);

RunMetrics score(const std::vector<IterationRecord>& records, const ExpectedTrace& expected,
                 const PlantTopology& topology);

/// Executed actions of a run, used as the expected trace for other runs.
ExpectedTrace trace_from_records(const std::vector<IterationRecord>& records);

void save_trace(const ExpectedTrace& trace, const std::filesystem::path& path);
ExpectedTrace load_trace(const std::filesystem::path& path);

/// Plain-text metrics table, one labelled row per metric.
std::string format_metrics_table(const RunMetrics& m, const std::string& column);

}  // namespace twinloop
