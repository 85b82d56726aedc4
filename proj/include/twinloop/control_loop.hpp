#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "twinloop/agents.hpp"
#include "twinloop/prompt.hpp"
#include "twinloop/symptoms.hpp"
#include "twinloop/twin.hpp"
#include "twinloop/validation.hpp"

namespace twinloop {

struct LoopConfig {
  int max_itr = 5;               // reprompts per decision point
  int max_steps = 200;           // decision points before the run times out
  double dt = 0.1;               // s
  double target_level_B204 = 0.245;  // m
  double symptom_threshold = 0.2;    // relative flow deviation
  double idle_interval = 5.0;        // s without flow before the next decision
  double max_decision_interval = 60.0;  // s between decisions at most
};

/// Throws ConfigError (path under "loop.") on a broken invariant.
void validate_loop_config(const LoopConfig& config, const PlantTopology& topology);

struct Scenario {
  std::string name;
  PlantTopology topology;
  PlantState initial;
  std::vector<FaultConfig> faults;
};

/// Everything a run needs besides the scenario and the backend.
struct RunSetup {
  LoopConfig loop;
  RuleConfig rules;
  TwinMode twin_mode = TwinMode::Mirror;
  Representation representation = Representation::Text;
  AgentProfile operator_profile = default_operator_profile();
  AgentProfile strategist_profile = default_strategist_profile();
};

/// One proposal and its verdict. A decision point produces one record per
/// attempt; only the last one of a point may be executed.
struct IterationRecord {
  int iteration = 0;
  int decision_point = 0;
  PlantState plant_state_before;
  PlantState plant_state_after;
  ActionProposal proposal;
  ValidationVerdict verdict;
  int reprompt_count_this_point = 0;
  bool forced = false;
  bool executed = false;
  ActionList executed_actions;
  ActionList dropped_actions;  // forced execution only: commands the plant refused
  std::size_t tokens_used = 0;
};

enum class Outcome { TargetReached, Timeout };

std::string_view to_string(Outcome outcome);

struct RunResult {
  Outcome outcome = Outcome::Timeout;
  std::vector<IterationRecord> records;
  std::vector<PlantState> plant_log;  // state after every simulation step
  PlantState final_state;
  int decision_points = 0;
};

RunResult run(const RunSetup& setup, const Scenario& scenario, DecisionBackend& backend);

/// Fault-free run of the default mixing module from an empty plant.
Scenario default_scenario();

}  // namespace twinloop
