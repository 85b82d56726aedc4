#include "twinloop/control_loop.hpp"

#include <set>

#include <fmt/format.h>

#include "twinloop/error.hpp"

namespace twinloop {

std::string_view to_string(Outcome outcome) {
  return outcome == Outcome::TargetReached ? "TargetReached" : "Timeout";
}

void validate_loop_config(const LoopConfig& c, const PlantTopology& topology) {
  if (c.max_itr < 0) throw ConfigError("loop.max_itr", "must be >= 0");
  if (c.max_steps <= 0) throw ConfigError("loop.max_steps", "must be > 0");
  if (!(c.dt > 0.0)) throw ConfigError("loop.dt", "must be > 0");
  const double h_max = topology.tank(kCollectorTank).h_max;
  if (!(c.target_level_B204 > 0.0 && c.target_level_B204 <= h_max)) {
    throw ConfigError("loop.target_level_B204", fmt::format("must lie in (0, {}]", h_max));
  }
  if (!(c.symptom_threshold > 0.0 && c.symptom_threshold < 1.0)) {
    throw ConfigError("loop.symptom_threshold", "must lie in (0, 1)");
  }
  if (!(c.idle_interval >= c.dt)) throw ConfigError("loop.idle_interval", "must be >= dt");
  if (!(c.max_decision_interval >= c.dt)) {
    throw ConfigError("loop.max_decision_interval", "must be >= dt");
  }
}

Scenario default_scenario() {
  Scenario s;
  s.name = "fault-free";
  s.topology = default_topology();
  s.initial = initial_state(s.topology);
  return s;
}

namespace {

std::set<FaultKind> kinds(const SymptomList& symptoms) {
  std::set<FaultKind> out;
  for (const auto& s : symptoms) out.insert(s.kind);
  return out;
}

bool quiescent(const PlantState& state) {
  if (state.pump_power > 0.0) return false;
  for (const auto& [id, open] : state.valve_open) {
    if (open) return false;
  }
  return true;
}

template <typename Call>
ActionProposal guarded(DecisionBackend& backend, Call&& call) {
  try {
    return call();
  } catch (const BackendError& e) {
    ActionProposal p;
    p.backend_id = backend.id();
    p.backend_error = e.what();
    return p;
  }
}

}  // namespace

RunResult run(const RunSetup& setup, const Scenario& scenario, DecisionBackend& backend) {
  const LoopConfig& cfg = setup.loop;
  const PlantTopology& topo = scenario.topology;
  validate_topology(topo);
  validate_loop_config(cfg, topo);
  horizon_steps(setup.rules.horizon, cfg.dt);

  const KnowledgeBase kb = default_knowledge_base(topo, cfg.target_level_B204);
  PlantState state = scenario.initial;
  check_state(state, topo);
  for (const auto& fault : scenario.faults) state = inject_fault(state, topo, fault);

  DigitalTwin twin(kb, setup.twin_mode, cfg.dt);
  const std::string collector{kCollectorTank};
  auto reached = [&] { return state.levels.at(collector) >= cfg.target_level_B204; };

  RunResult result;
  result.outcome = Outcome::Timeout;
  if (reached()) {
    result.outcome = Outcome::TargetReached;
    result.final_state = state;
    return result;
  }

  int iteration = 0;
  for (int point = 0; point < cfg.max_steps; ++point) {
    // Monitor
    const SensorReadings readings = read_sensors(state, topo);
    const SymptomList symptoms = detect_symptoms(readings, state, topo, cfg.symptom_threshold);
    twin.sync(state);
    const PromptBundle prompt = render(kb, state, setup.representation, setup.operator_profile, symptoms);
    const DecisionInput input{state, symptoms};

    // Generate action
    ActionProposal proposal = guarded(backend, [&] { return backend.propose(prompt, input); });

    for (int attempt = 0;; ++attempt) {
      // Simulate + validate
      ValidationVerdict verdict =
          proposal.backend_error ? reject_malformed(proposal) : validate(proposal, twin, setup.rules);

      IterationRecord rec;
      rec.iteration = iteration++;
      rec.decision_point = point;
      rec.plant_state_before = state;
      rec.reprompt_count_this_point = attempt;
      rec.tokens_used = proposal.prompt_tokens + proposal.completion_tokens;

      if (verdict.valid) {
        state = apply_actions(state, topo, proposal.actions);
        rec.executed = true;
        rec.executed_actions = proposal.actions;
      } else if (attempt < cfg.max_itr) {
        RepromptContext ctx;
        ctx.prior_proposal = proposal;
        ctx.violations = verdict.violations;
        ctx.twin_feedback =
            verdict.prediction.trajectory.empty() ? std::string() : summarize(verdict.prediction, topo);
        ctx.attempt_index = attempt + 1;
        ctx.max_itr = cfg.max_itr;
        rec.plant_state_after = state;
        rec.proposal = std::move(proposal);
        rec.verdict = std::move(verdict);
        result.records.push_back(std::move(rec));

        const PromptBundle strategy_prompt =
            render(kb, state, setup.representation, setup.strategist_profile, symptoms);
        proposal = guarded(backend, [&] { return backend.reprompt(ctx, strategy_prompt, input); });
        continue;
      } else {
        // Reprompt budget exhausted: hand the last proposal to the plant.
        LenientApplyResult forced = apply_actions_lenient(state, topo, proposal.actions);
        state = forced.state;
        rec.forced = true;
        rec.executed = true;
        rec.executed_actions = std::move(forced.applied);
        rec.dropped_actions = std::move(forced.dropped);
      }
      rec.plant_state_after = state;
      rec.proposal = std::move(proposal);
      rec.verdict = std::move(verdict);
      result.records.push_back(std::move(rec));
      break;
    }
    result.decision_points = point + 1;

    // Let the plant run until something worth a decision happens.
    const double started = state.time;
    while (true) {
      state = step(state, topo, cfg.dt);
      result.plant_log.push_back(state);
      if (reached()) {
        result.outcome = Outcome::TargetReached;
        result.final_state = state;
        return result;
      }
      const SensorReadings now = read_sensors(state, topo);
      if (now.discrete_levels != readings.discrete_levels) break;
      const auto seen = kinds(symptoms);
      bool new_symptom = false;
      for (FaultKind k : kinds(detect_symptoms(now, state, topo, cfg.symptom_threshold))) {
        new_symptom = new_symptom || !seen.count(k);
      }
      if (new_symptom) break;
      const double elapsed = state.time - started;
      if (quiescent(state) && elapsed >= cfg.idle_interval - 1e-9) break;
      if (elapsed >= cfg.max_decision_interval - 1e-9) break;
    }
  }
  result.final_state = state;
  return result;
}

}  // namespace twinloop
