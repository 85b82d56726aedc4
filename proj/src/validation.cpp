#include "twinloop/validation.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>

namespace twinloop {

double proposal_cost(const TwinPrediction& prediction, std::size_t action_count,
                     const PlantTopology& topology, double dt, const CostWeights& weights) {
  double peak = 0.0;
  double energy = 0.0;
  for (const auto& s : prediction.trajectory) {
    for (const auto& t : topology.tanks) peak = std::max(peak, s.levels.at(t.id) / t.h_max);
    energy += s.pump_power * s.pump_power * dt;
  }
  return weights.overflow_margin * peak + weights.pump_energy * energy +
         weights.action_count * static_cast<double>(action_count);
}

ValidationVerdict validate(const ActionProposal& proposal, const DigitalTwin& twin,
                           const RuleConfig& rules) {
  const PlantTopology& topo = twin.topology();
  ValidationVerdict verdict;

  std::vector<bool> usable(proposal.actions.size(), true);
  for (std::size_t i = 0; i < proposal.actions.size(); ++i) {
    const Action& a = proposal.actions[i];
    const bool pump = topo.is_pump(a.actuator);
    const bool known = pump ? a.command == Command::SetPower
                            : topo.has_valve(a.actuator) && a.command != Command::SetPower;
    if (!known) {
      verdict.violations.push_back(
          {ViolationCode::UnknownActuator,
           topo.has_actuator(a.actuator) ? fmt::format("'{}' is not a command this actuator accepts",
                                                       format_action(a))
                                         : fmt::format("no actuator named '{}'", a.actuator),
           a.actuator});
      usable[i] = false;
    }
  }
  for (std::size_t i = 0; i < proposal.actions.size(); ++i) {
    const Action& a = proposal.actions[i];
    if (usable[i] && a.command == Command::SetPower && !(a.power >= 0.0 && a.power <= 1.0)) {
      verdict.violations.push_back({ViolationCode::PumpPowerOutOfBounds,
                                    fmt::format("power {} outside [0, 1]", a.power), a.actuator});
      usable[i] = false;
    }
  }
  std::map<std::string, int> commands_per_actuator;
  for (const auto& a : proposal.actions) ++commands_per_actuator[a.actuator];
  for (const auto& [actuator, count] : commands_per_actuator) {
    if (count > 1) {
      verdict.violations.push_back(
          {ViolationCode::ConflictingActions,
           fmt::format("{} commands for the same actuator", count), actuator});
    }
  }

  // Later duplicates are ignored, as the plant would reject them.
  ActionList simulated;
  std::set<std::string> taken;
  for (std::size_t i = 0; i < proposal.actions.size(); ++i) {
    const Action& a = proposal.actions[i];
    if (usable[i] && taken.insert(a.actuator).second) simulated.push_back(a);
  }
  verdict.prediction = twin.predict(simulated, rules.horizon);

  for (const auto& tank : verdict.prediction.overflowed_tanks()) {
    auto when = std::find_if(verdict.prediction.trajectory.begin(),
                             verdict.prediction.trajectory.end(),
                             [&](const PlantState& s) { return s.overflowed.contains(tank); });
    verdict.violations.push_back(
        {ViolationCode::PredictedOverflow,
         fmt::format("tank {} reaches h_max at t={:.1f}s", tank, when->time), tank});
  }

  if (rules.no_progress) {
    const PlantState& first = verdict.prediction.trajectory.front();
    auto open = first.valve_open.find(std::string(kTransferValve));
    const bool transferring = first.pump_power > 0.0 && open != first.valve_open.end() && open->second;
    const std::string b204{kCollectorTank};
    const double before = twin.base_state().levels.at(b204);
    const double after = verdict.prediction.trajectory.back().levels.at(b204);
    if (transferring && !(after > before)) {
      verdict.violations.push_back(
          {ViolationCode::NoProgress,
           fmt::format("B204 level does not rise over {:.1f}s ({:.4f} m -> {:.4f} m)", rules.horizon,
                       before, after),
           b204});
    }
  }

  verdict.valid = verdict.violations.empty();
  verdict.cost = proposal_cost(verdict.prediction, proposal.actions.size(), topo, twin.dt(),
                               rules.cost_weights);
  return verdict;
}

ValidationVerdict reject_malformed(const ActionProposal& proposal) {
  ValidationVerdict verdict;
  verdict.valid = false;
  verdict.violations.push_back({ViolationCode::MalformedProposal,
                                proposal.backend_error.value_or("backend returned no usable proposal"),
                                std::nullopt});
  return verdict;
}

}  // namespace twinloop
