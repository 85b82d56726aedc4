#include <doctest.h>

#include "support.hpp"
#include "twinloop/error.hpp"
#include "twinloop/metrics.hpp"

using namespace twinloop;

namespace {

ActionKey key(const std::string& actuator, MatchKind kind) { return {actuator, kind}; }

const PlantTopology& topo() {
  static const PlantTopology t = default_topology();
  return t;
}

/// Valve keys cycled over the topology's valves, for building synthetic logs.
std::vector<ActionKey> valve_keys(int n) {
  std::vector<ActionKey> out;
  const auto& valves = topo().valves;
  for (int i = 0; i < n; ++i) {
    out.push_back(key(valves[static_cast<std::size_t>(i) % valves.size()].id,
                      i % 2 == 0 ? MatchKind::Open : MatchKind::Close));
  }
  return out;
}

}  // namespace

TEST_CASE("match keys") {
  CHECK(match_key(Action::open("valve_in0"), 0.0) == key("valve_in0", MatchKind::Open));
  CHECK(match_key(Action::close("valve_in0"), 0.0) == key("valve_in0", MatchKind::Close));
  CHECK(match_key(Action::set_power("pump_P101", 0.8), 0.5) == key("pump_P101", MatchKind::Increase));
  CHECK(match_key(Action::set_power("pump_P101", 0.2), 0.5) == key("pump_P101", MatchKind::Decrease));
  CHECK(match_key(Action::set_power("pump_P101", 0.5), 0.5) == key("pump_P101", MatchKind::Hold));
  for (auto k : {MatchKind::Open, MatchKind::Close, MatchKind::Increase, MatchKind::Decrease, MatchKind::Hold}) {
    CHECK(parse_key(format_key(key("pump_P101", k))) == key("pump_P101", k));
  }
  CHECK_THROWS_AS(parse_key("valve_in0 open"), ConfigError);
  CHECK_THROWS_AS(parse_key("valve_in0 - toggle"), ConfigError);
}

TEST_CASE("fifteen correct actions and one reprompt") {
  ExpectedTrace trace;
  std::vector<DecisionLog> logs;
  const auto keys = valve_keys(15);
  for (std::size_t i = 0; i < keys.size(); i += 3) {
    trace.decision_points.push_back({keys.begin() + static_cast<long>(i), keys.begin() + static_cast<long>(i) + 3});
    logs.push_back({trace.decision_points.back(), 0, 1000});
  }
  logs[2].reprompts = 1;
  const RunMetrics m = score_logs(logs, trace, topo());
  CHECK(m == RunMetrics{15, 15, 15, 0, 0, 0, 0, 1, 5000});
  CHECK(m.identities_hold());
}

TEST_CASE("twelve correct, two incorrect valve, three missed pump") {
  ExpectedTrace trace;
  std::vector<DecisionLog> logs;
  const auto keys = valve_keys(12);
  for (int i = 0; i < 3; ++i) {
    std::vector<ActionKey> expected(keys.begin() + 4 * i, keys.begin() + 4 * i + 4);
    std::vector<ActionKey> executed = expected;
    expected.push_back(key("pump_P101", MatchKind::Increase));
    trace.decision_points.push_back(expected);
    if (i < 2) executed.push_back(key("valve_B204_out", MatchKind::Open));
    logs.push_back({executed, i == 0 ? 4 : 3, 0});
  }
  const RunMetrics m = score_logs(logs, trace, topo());
  CHECK(m.n_actions == 14);
  CHECK(m.n_expected_actions == 15);
  CHECK(m.n_correct == 12);
  CHECK(m.n_incorrect_valve == 2);
  CHECK(m.n_incorrect_pump == 0);
  CHECK(m.n_missed_valve == 0);
  CHECK(m.n_missed_pump == 3);
  CHECK(m.n_reprompts == 10);
  CHECK(m.identities_hold());
}

TEST_CASE("empty log and empty trace") {
  const RunMetrics m = score_logs({}, ExpectedTrace{}, topo());
  CHECK(m == RunMetrics{});
  CHECK(m.identities_hold());
  CHECK(score({}, ExpectedTrace{}, topo()) == RunMetrics{});
}

TEST_CASE("trace longer than the run is a mismatch") {
  ExpectedTrace trace;
  trace.decision_points.resize(2);
  std::vector<DecisionLog> logs(1);
  CHECK_THROWS_AS(score_logs(logs, trace, topo()), TraceMismatch);
}

TEST_CASE("run longer than the trace counts extra actions as incorrect") {
  ExpectedTrace trace;
  trace.decision_points.push_back({key("valve_in0", MatchKind::Open)});
  std::vector<DecisionLog> logs{{{key("valve_in0", MatchKind::Open)}, 0, 0},
                                {{key("pump_P101", MatchKind::Increase)}, 0, 0}};
  const RunMetrics m = score_logs(logs, trace, topo());
  CHECK(m.n_correct == 1);
  CHECK(m.n_incorrect_pump == 1);
  CHECK(m.identities_hold());
}

TEST_CASE("matching is order-insensitive within a point and order-sensitive across points") {
  const auto a = key("valve_in0", MatchKind::Open);
  const auto b = key("valve_in1", MatchKind::Open);
  const auto c = key("pump_P101", MatchKind::Increase);
  ExpectedTrace trace;
  trace.decision_points = {{a, b}, {c}};
  CHECK(score_logs({{{b, a}, 0, 0}, {{c}, 0, 0}}, trace, topo()).n_correct == 3);
  const RunMetrics swapped = score_logs({{{c}, 0, 0}, {{a, b}, 0, 0}}, trace, topo());
  CHECK(swapped.n_correct == 0);
  CHECK(swapped.n_missed_valve == 2);
  CHECK(swapped.n_missed_pump == 1);
  CHECK(swapped.n_incorrect_valve == 2);
  CHECK(swapped.n_incorrect_pump == 1);
}

TEST_CASE("duplicates are matched as a multiset") {
  const auto a = key("valve_in0", MatchKind::Open);
  ExpectedTrace trace;
  trace.decision_points = {{a}};
  const RunMetrics m = score_logs({{{a, a}, 0, 0}}, trace, topo());
  CHECK(m.n_correct == 1);
  CHECK(m.n_incorrect_valve == 1);
}

TEST_CASE("records are reduced per decision point") {
  IterationRecord rejected;
  rejected.decision_point = 0;
  rejected.tokens_used = 100;
  IterationRecord accepted;
  accepted.decision_point = 0;
  accepted.reprompt_count_this_point = 1;
  accepted.tokens_used = 50;
  accepted.executed = true;
  accepted.plant_state_before.pump_power = 0.5;
  accepted.executed_actions = {Action::set_power("pump_P101", 1.0), Action::open("valve_in0")};
  const auto logs = decision_logs({rejected, accepted});
  REQUIRE(logs.size() == 1);
  CHECK(logs[0].tokens == 150);
  CHECK(logs[0].reprompts == 1);
  CHECK(logs[0].executed == std::vector{key("pump_P101", MatchKind::Increase), key("valve_in0", MatchKind::Open)});
}

TEST_CASE("traces survive a save/load cycle") {
  ExpectedTrace trace;
  trace.decision_points = {{key("valve_in0", MatchKind::Open)}, {}, {key("pump_P101", MatchKind::Hold)}};
  const auto dir = testsupport::scratch_dir("trace");
  save_trace(trace, dir / "t.json");
  CHECK(load_trace(dir / "t.json").decision_points == trace.decision_points);
  CHECK_THROWS_AS(load_trace(dir / "missing.json"), IoError);
  testsupport::write_file(dir / "bad.json", "{\"decision_points\": 3}");
  CHECK_THROWS_AS(load_trace(dir / "bad.json"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("bundled trace fixtures equal fresh oracle traces") {
  const auto dir = testsupport::source_dir() / "scenarios";
  for (const char* name : {"fault-free", "clogging-0.25", "clogging-0.5", "clogging-0.75"}) {
    CAPTURE(name);
    Scenario scenario = default_scenario();
    const std::string n = name;
    if (n != "fault-free") {
      scenario.faults.push_back({FaultKind::Clogging, std::stod(n.substr(9)), "pipe_transfer", 80.0});
    }
    OracleBackend oracle(default_knowledge_base(scenario.topology, 0.245));
    const RunResult r = run(RunSetup{}, scenario, oracle);
    CHECK(load_trace(dir / "traces" / (n + ".json")).decision_points ==
          trace_from_records(r.records).decision_points);
  }
}

TEST_CASE("metrics table lists every row") {
  const std::string t = format_metrics_table(RunMetrics{15, 15, 15, 0, 0, 0, 0, 1, 16200}, "Text");
  for (const char* row : {"No. of Actions", "No. of Expected Actions", "No. of Correct Actions",
                          "No. of Incorrect Valve Actions", "No. of Incorrect Pump Actions",
                          "No. of Missed Valve Actions", "No. of Missed Pump Actions", "No. of Reprompts",
                          "No. of Tokens (K)"}) {
    CHECK(t.find(row) != std::string::npos);
  }
  CHECK(t.find("16.2") != std::string::npos);
}
