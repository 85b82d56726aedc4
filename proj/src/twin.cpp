#include "twinloop/twin.hpp"

#include <cmath>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "twinloop/error.hpp"

namespace twinloop {

bool guard_holds(const Guard& guard, const SensorReadings& readings) {
  double value = 0.0;
  if (auto it = readings.discrete_levels.find(guard.sensor); it != readings.discrete_levels.end()) {
    if (guard.kind == GuardKind::FlagTrue) return it->second;
    value = it->second ? 1.0 : 0.0;
  } else if (auto p = readings.pressures.find(guard.sensor); p != readings.pressures.end()) {
    value = p->second;
  } else if (guard.sensor == kFlowSensor) {
    value = readings.volume_flow_rate;
  } else {
    return false;
  }
  switch (guard.kind) {
    case GuardKind::FlagTrue: return value != 0.0;
    case GuardKind::AtLeast: return value >= guard.threshold;
    case GuardKind::AtMost: return value <= guard.threshold;
  }
  return false;
}

std::string describe(const Guard& guard) {
  switch (guard.kind) {
    case GuardKind::FlagTrue: return guard.sensor + " == true";
    case GuardKind::AtLeast: return fmt::format("{} >= {}", guard.sensor, guard.threshold);
    case GuardKind::AtMost: return fmt::format("{} <= {}", guard.sensor, guard.threshold);
  }
  return guard.sensor;
}

KnowledgeBase default_knowledge_base(const PlantTopology& topology, double target_level_B204) {
  KnowledgeBase kb;
  kb.topology = topology;
  kb.target_level_B204 = target_level_B204;
  kb.function_text =
      "Mixing of three liquids, sequentially transferred from tanks B201, B202, and B203 into "
      "tank B204.";

  auto& steps = kb.behavior_machine.steps;
  const std::string pump{kPumpId};
  const std::string transfer{kTransferValve};
  const char* feeds[] = {"B201", "B202", "B203"};

  int index = 1;
  for (int i = 0; i < 3; ++i) {
    const std::string tank = feeds[i];
    const std::string inlet = fmt::format("valve_in{}", i);
    const std::string outlet = fmt::format("valve_{}_out", tank);

    SequenceStep fill;
    fill.index = index++;
    fill.name = "fill_" + tank;
    fill.description = fmt::format("Fill {} through {} until its high level sensor trips.", tank, inlet);
    if (i > 0) {
      const std::string prev_outlet = fmt::format("valve_{}_out", feeds[i - 1]);
      fill.entry_actions = {Action::close(prev_outlet), Action::close(transfer),
                            Action::set_power(pump, 0.0)};
    }
    fill.entry_actions.push_back(Action::open(inlet));
    fill.exit_guard = Guard{high_sensor_id(tank), GuardKind::FlagTrue, 0.0};
    steps.push_back(fill);

    SequenceStep move;
    move.index = index++;
    move.name = "transfer_" + tank;
    move.description =
        fmt::format("Pump {} into B204 until its low level sensor trips.", tank);
    move.entry_actions = {Action::close(inlet), Action::open(outlet), Action::open(transfer),
                          Action::set_power(pump, kNominalTransferPower)};
    move.exit_guard = Guard{low_sensor_id(tank), GuardKind::FlagTrue, 0.0};
    move.pump_setpoint = kNominalTransferPower;
    steps.push_back(move);
  }

  SequenceStep settle;
  settle.index = index++;
  settle.name = "settle";
  settle.description = "Close all valves and stop the pump until the line is at rest.";
  settle.entry_actions = {Action::close("valve_B203_out"), Action::close(transfer),
                          Action::set_power(pump, 0.0)};
  settle.exit_guard = Guard{std::string(kFlowSensor), GuardKind::AtMost, 0.0};
  steps.push_back(settle);

  SequenceStep residual;
  residual.index = index++;
  residual.name = "drain_residuals";
  residual.description =
      "Open all feed outlets and pump the residual liquid into B204 until it reaches the "
      "target level.";
  for (const char* tank : feeds) residual.entry_actions.push_back(Action::open(fmt::format("valve_{}_out", tank)));
  residual.entry_actions.push_back(Action::open(transfer));
  residual.entry_actions.push_back(Action::set_power(pump, kNominalTransferPower));
  residual.exit_guard = Guard{pressure_sensor_id(kCollectorTank), GuardKind::AtLeast,
                              kWaterDensity * kGravity * target_level_B204};
  residual.pump_setpoint = kNominalTransferPower;
  steps.push_back(residual);

  SequenceStep done;
  done.index = index++;
  done.name = "complete";
  done.description = "B204 holds the mixture at its target level; no further action.";
  steps.push_back(done);
  return kb;
}

void validate_knowledge_base(const KnowledgeBase& kb) {
  for (const auto& s : kb.behavior_machine.steps) {
    if (s.exit_guard && !kb.topology.has_sensor(s.exit_guard->sensor)) {
      throw PlantError(PlantErrorCode::InvalidTopology,
                       fmt::format("step {} guard references unknown sensor {}", s.index,
                                   s.exit_guard->sensor));
    }
    for (const auto& a : s.entry_actions) {
      if (!kb.topology.has_actuator(a.actuator)) {
        throw PlantError(PlantErrorCode::InvalidTopology,
                         fmt::format("step {} entry action references unknown actuator {}",
                                     s.index, a.actuator));
      }
    }
  }
}

ActuatorConfig step_configuration(const KnowledgeBase& kb, int index) {
  ActuatorConfig config;
  for (const auto& v : kb.topology.valves) config.valve_open[v.id] = false;
  for (const auto& s : kb.behavior_machine.steps) {
    if (s.index > index) break;
    for (const auto& a : s.entry_actions) {
      if (a.command == Command::SetPower) {
        config.pump_on = a.power > 0.0;
      } else {
        config.valve_open[a.actuator] = a.command == Command::Open;
      }
    }
  }
  return config;
}

ActuatorConfig current_configuration(const PlantState& state) {
  return ActuatorConfig{state.valve_open, state.pump_power > 0.0};
}

std::set<std::string> TwinPrediction::overflowed_tanks() const {
  std::set<std::string> tanks;
  for (const auto& s : trajectory) tanks.insert(s.overflowed.begin(), s.overflowed.end());
  return tanks;
}

std::string_view to_string(TwinMode mode) {
  return mode == TwinMode::Mirror ? "mirror" : "blind";
}

std::optional<TwinMode> twin_mode_from_string(std::string_view name) {
  if (name == "mirror") return TwinMode::Mirror;
  if (name == "blind") return TwinMode::Blind;
  return std::nullopt;
}

long horizon_steps(double horizon, double dt) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon) || !(dt > 0.0)) {
    throw PlantError(PlantErrorCode::InvalidHorizon,
                     fmt::format("horizon {} with dt {}", horizon, dt));
  }
  const double ratio = horizon / dt;
  const double n = std::round(ratio);
  if (std::abs(ratio - n) > 1e-9 * std::max(1.0, n)) {
    throw PlantError(PlantErrorCode::InvalidHorizon,
                     fmt::format("horizon {} is not a multiple of dt {}", horizon, dt));
  }
  return static_cast<long>(n);
}

DigitalTwin::DigitalTwin(KnowledgeBase kb, TwinMode mode, double dt)
    : kb_(std::move(kb)), mode_(mode), dt_(dt), base_(initial_state(kb_.topology)) {
  if (!(dt_ > 0.0)) {
    throw PlantError(PlantErrorCode::InvalidTimestep, fmt::format("dt must be > 0, got {}", dt_));
  }
}

void DigitalTwin::sync(const PlantState& plant_state) {
  check_state(plant_state, kb_.topology);
  base_ = plant_state;
  if (mode_ == TwinMode::Blind) base_.active_faults.clear();
}

TwinPrediction DigitalTwin::predict(std::span<const Action> actions, double horizon) const {
  const long n = horizon_steps(horizon, dt_);
  TwinPrediction prediction;
  prediction.horizon = horizon;
  prediction.triggering_actions.assign(actions.begin(), actions.end());

  PlantState state = apply_actions(base_, kb_.topology, actions);
  if (n == 0) {
    prediction.trajectory.push_back(state);
    return prediction;
  }
  prediction.trajectory.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    state = step(state, kb_.topology, dt_);
    prediction.trajectory.push_back(state);
  }
  return prediction;
}

std::string summarize(const TwinPrediction& prediction, const PlantTopology& topology) {
  if (prediction.trajectory.empty()) return "twin prediction: empty";
  const PlantState& last = prediction.trajectory.back();
  std::string levels;
  for (const auto& t : topology.tanks) {
    if (!levels.empty()) levels += ", ";
    levels += fmt::format("{}={:.3f}m", t.id, last.levels.at(t.id));
  }
  const auto over = prediction.overflowed_tanks();
  std::string overflow = over.empty() ? "none" : fmt::format("{}", fmt::join(over, ", "));
  return fmt::format("twin prediction over {:.1f} s: final levels {}; pump {:.3f}; overflow: {}",
                     prediction.horizon, levels, last.pump_power, overflow);
}

}  // namespace twinloop
