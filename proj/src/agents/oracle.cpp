#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "twinloop/agents.hpp"

namespace twinloop {

OracleBackend::OracleBackend(KnowledgeBase kb) : kb_(std::move(kb)) {}

int OracleBackend::infer_step(const PlantState& state) const {
  const ActuatorConfig current = current_configuration(state);
  const ActuatorConfig idle = step_configuration(kb_, 0);
  if (current == idle) {
    const auto& b204 = kb_.topology.tank(kCollectorTank);
    const bool nothing_collected = state.levels.at(b204.id) <= b204.level_low_threshold;
    for (const auto& s : kb_.behavior_machine.steps) {
      if (step_configuration(kb_, s.index) == idle && s.index > 1) {
        return nothing_collected ? 0 : s.index;
      }
    }
    return 0;
  }
  for (const auto& s : kb_.behavior_machine.steps) {
    // Steps without entry actions share the configuration of their predecessor.
    if (s.entry_actions.empty()) continue;
    if (step_configuration(kb_, s.index) == current) return s.index;
  }
  return -1;
}

ActionList OracleBackend::decide(const PlantState& state, const SymptomList& symptoms) const {
  if (state.levels.at(std::string(kCollectorTank)) >= kb_.target_level_B204) return {};

  const int step = infer_step(state);
  if (step < 0) return {};
  const SensorReadings readings = read_sensors(state, kb_.topology);
  const auto& steps = kb_.behavior_machine;
  const int last = static_cast<int>(steps.steps.size());

  if (step == 0) {
    int target = 1;
    while (target < last && steps.at(target).exit_guard &&
           guard_holds(*steps.at(target).exit_guard, readings)) {
      ++target;
    }
    return steps.at(target).entry_actions;
  }

  const SequenceStep& current = steps.at(step);
  if (current.exit_guard && step < last && guard_holds(*current.exit_guard, readings)) {
    return steps.at(step + 1).entry_actions;
  }

  if (current.pump_setpoint > 0.0) {
    auto clog = std::find_if(symptoms.begin(), symptoms.end(),
                             [](const Symptom& s) { return s.kind == FaultKind::Clogging; });
    if (clog != symptoms.end() && clog->severity_estimate < 1.0) {
      const double power = std::min(1.0, current.pump_setpoint / (1.0 - clog->severity_estimate));
      if (std::abs(power - state.pump_power) > 1e-12) {
        return {Action::set_power(kb_.topology.pump.id, power)};
      }
    } else if (clog != symptoms.end() && state.pump_power < 1.0) {
      return {Action::set_power(kb_.topology.pump.id, 1.0)};
    }
  }
  return {};
}

ActionProposal OracleBackend::respond(const PromptBundle& prompt, const DecisionInput& input,
                                      bool /*refinement*/) {
  ActionProposal p;
  p.actions = decide(input.state, input.symptoms);
  const int step = infer_step(input.state);
  p.rationale = step > 0 ? fmt::format("sequence step {} ({})", step,
                                       kb_.behavior_machine.at(step).name)
                         : std::string("sequence start");
  if (!input.symptoms.empty()) {
    p.rationale += fmt::format("; clogging symptom, estimated severity {:.3f}",
                               input.symptoms.front().severity_estimate);
  }
  p.prompt_tokens = prompt.token_estimate;
  p.completion_tokens = estimate_tokens(format_actions(p.actions));
  p.backend_id = id();
  return p;
}

}  // namespace twinloop
