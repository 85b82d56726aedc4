#include "twinloop/plant.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "twinloop/error.hpp"

namespace twinloop {

std::string_view to_string(PlantErrorCode code) {
  switch (code) {
    case PlantErrorCode::InvalidTimestep: return "InvalidTimestep";
    case PlantErrorCode::TopologyMismatch: return "TopologyMismatch";
    case PlantErrorCode::UnknownActuator: return "UnknownActuator";
    case PlantErrorCode::ConflictingActions: return "ConflictingActions";
    case PlantErrorCode::PowerOutOfBounds: return "PowerOutOfBounds";
    case PlantErrorCode::DuplicateFault: return "DuplicateFault";
    case PlantErrorCode::InvalidFault: return "InvalidFault";
    case PlantErrorCode::InvalidTopology: return "InvalidTopology";
    case PlantErrorCode::InvalidHorizon: return "InvalidHorizon";
  }
  return "PlantError";
}

std::string_view to_string(BackendErrorKind kind) {
  switch (kind) {
    case BackendErrorKind::Timeout: return "BackendTimeout";
    case BackendErrorKind::Protocol: return "BackendProtocolError";
    case BackendErrorKind::Unparseable: return "UnparseableResponse";
  }
  return "BackendError";
}

std::string_view to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::Clogging: return "clogging";
    case FaultKind::Leakage: return "leakage";
    case FaultKind::PumpDegradation: return "pump_degradation";
  }
  return "unknown";
}

std::optional<FaultKind> fault_kind_from_string(std::string_view name) {
  if (name == "clogging") return FaultKind::Clogging;
  if (name == "leakage") return FaultKind::Leakage;
  if (name == "pump_degradation") return FaultKind::PumpDegradation;
  return std::nullopt;
}

namespace {

template <typename Spec>
const Spec* find_by_id(const std::vector<Spec>& specs, std::string_view id) {
  auto it = std::find_if(specs.begin(), specs.end(), [&](const Spec& s) { return s.id == id; });
  return it == specs.end() ? nullptr : &*it;
}

[[noreturn]] void topology_error(const std::string& detail) {
  throw PlantError(PlantErrorCode::InvalidTopology, detail);
}

bool is_pseudo_node(std::string_view node) {
  return node == kSupplyNode || node == kManifoldNode || node == kDrainNode;
}

}  // namespace

const TankSpec& PlantTopology::tank(std::string_view id) const {
  if (auto* t = find_by_id(tanks, id)) return *t;
  throw PlantError(PlantErrorCode::TopologyMismatch, fmt::format("unknown tank '{}'", id));
}

const ValveSpec& PlantTopology::valve(std::string_view id) const {
  if (auto* v = find_by_id(valves, id)) return *v;
  throw PlantError(PlantErrorCode::TopologyMismatch, fmt::format("unknown valve '{}'", id));
}

const PipeSpec& PlantTopology::pipe(std::string_view id) const {
  if (auto* p = find_by_id(pipes, id)) return *p;
  throw PlantError(PlantErrorCode::TopologyMismatch, fmt::format("unknown pipe '{}'", id));
}

bool PlantTopology::has_tank(std::string_view id) const { return find_by_id(tanks, id) != nullptr; }
bool PlantTopology::has_valve(std::string_view id) const { return find_by_id(valves, id) != nullptr; }
bool PlantTopology::has_pipe(std::string_view id) const { return find_by_id(pipes, id) != nullptr; }
bool PlantTopology::has_sensor(std::string_view id) const { return find_by_id(sensors, id) != nullptr; }

bool PlantTopology::has_actuator(std::string_view id) const {
  return has_valve(id) || is_pump(id);
}

std::string high_sensor_id(std::string_view tank) {
  return fmt::format("sensor_discrete_tank_{}_high", tank);
}

std::string low_sensor_id(std::string_view tank) {
  return fmt::format("sensor_discrete_tank_{}_low", tank);
}

std::string pressure_sensor_id(std::string_view tank) {
  return fmt::format("sensor_continuous_pressure_tank_{}", tank);
}

PlantTopology default_topology() {
  PlantTopology topo;
  for (const char* id : {"B201", "B202", "B203"}) {
    topo.tanks.push_back(TankSpec{id, 0.01, 0.3, 0.25, 0.01});
  }
  // The collector receives three batches, so it is three times wider.
  topo.tanks.push_back(TankSpec{std::string(kCollectorTank), 0.03, 0.3, 0.25, 0.01});

  const char* feeds[] = {"B201", "B202", "B203"};
  for (int i = 0; i < 3; ++i) {
    topo.valves.push_back(ValveSpec{fmt::format("valve_in{}", i), 1e-4});
  }
  for (const char* tank : feeds) {
    topo.valves.push_back(ValveSpec{fmt::format("valve_{}_out", tank), 1e-4});
  }
  topo.valves.push_back(ValveSpec{std::string(kTransferValve), 1e-4});
  topo.valves.push_back(ValveSpec{"valve_B204_out", 1e-4});

  topo.pump = PumpSpec{std::string(kPumpId), 2e-4};

  for (int i = 0; i < 3; ++i) {
    topo.pipes.push_back(PipeSpec{fmt::format("pipe_in{}", i), std::string(kSupplyNode), feeds[i],
                                  fmt::format("valve_in{}", i), false});
  }
  for (const char* tank : feeds) {
    topo.pipes.push_back(PipeSpec{fmt::format("pipe_{}_out", tank), tank,
                                  std::string(kManifoldNode), fmt::format("valve_{}_out", tank),
                                  false});
  }
  topo.pipes.push_back(PipeSpec{std::string(kTransferPipe), std::string(kManifoldNode),
                                std::string(kCollectorTank), std::string(kTransferValve), true});
  topo.pipes.push_back(PipeSpec{"pipe_B204_out", std::string(kCollectorTank),
                                std::string(kDrainNode), "valve_B204_out", false});

  for (const auto& tank : topo.tanks) {
    topo.sensors.push_back(SensorSpec{high_sensor_id(tank.id), SensorKind::DiscreteHigh, tank.id});
    topo.sensors.push_back(SensorSpec{low_sensor_id(tank.id), SensorKind::DiscreteLow, tank.id});
  }
  for (const auto& tank : topo.tanks) {
    topo.sensors.push_back(SensorSpec{pressure_sensor_id(tank.id), SensorKind::Pressure, tank.id});
  }
  topo.sensors.push_back(
      SensorSpec{std::string(kFlowSensor), SensorKind::VolumeFlow, std::string(kTransferPipe)});
  return topo;
}

void validate_topology(const PlantTopology& topo) {
  const char* expected_tanks[] = {"B201", "B202", "B203", "B204"};
  if (topo.tanks.size() != 4) topology_error("expected exactly 4 tanks");
  for (const char* id : expected_tanks) {
    if (!topo.has_tank(id)) topology_error(fmt::format("missing tank {}", id));
  }
  if (topo.valves.size() != 8) topology_error("expected exactly 8 valves");
  for (const char* id : {"valve_in0", "valve_in1", "valve_in2"}) {
    if (!topo.has_valve(id)) topology_error(fmt::format("missing filling valve {}", id));
  }
  if (topo.pump.id != kPumpId) topology_error("pump must be pump_P101");

  for (const auto& t : topo.tanks) {
    if (!(t.area > 0)) topology_error(fmt::format("tank {}: area must be > 0", t.id));
    if (!(t.level_low_threshold > 0 && t.level_low_threshold < t.level_high_threshold &&
          t.level_high_threshold <= t.h_max)) {
      topology_error(fmt::format("tank {}: need 0 < low < high <= h_max", t.id));
    }
  }
  for (const auto& v : topo.valves) {
    if (!(v.conductance > 0)) topology_error(fmt::format("valve {}: conductance must be > 0", v.id));
  }
  if (!(topo.pump.q_max > 0)) topology_error("pump q_max must be > 0");
  if (!(topo.leak_coefficient >= 0)) topology_error("leak coefficient must be >= 0");
  if (!(topo.degradation_efficiency >= 0 && topo.degradation_efficiency <= 1)) {
    topology_error("degradation efficiency must lie in [0, 1]");
  }

  auto endpoint_ok = [&](const std::string& node) {
    return topo.has_tank(node) || is_pseudo_node(node);
  };
  for (const auto& p : topo.pipes) {
    if (!endpoint_ok(p.source) || !endpoint_ok(p.sink)) {
      topology_error(fmt::format("pipe {}: unknown endpoint", p.id));
    }
    if (p.valve_id && !topo.has_valve(*p.valve_id)) {
      topology_error(fmt::format("pipe {}: unknown valve {}", p.id, *p.valve_id));
    }
    if (!p.pumped && p.source == kSupplyNode && !p.valve_id) {
      topology_error(fmt::format("pipe {}: supply pipe needs a valve", p.id));
    }
    if (!p.pumped && p.sink == kDrainNode && !p.valve_id) {
      topology_error(fmt::format("pipe {}: drain pipe needs a valve", p.id));
    }
  }
  for (const auto& s : topo.sensors) {
    if (!topo.has_tank(s.target) && !topo.has_pipe(s.target)) {
      topology_error(fmt::format("sensor {}: unknown target {}", s.id, s.target));
    }
  }
}

PlantState initial_state(const PlantTopology& topology) {
  PlantState state;
  for (const auto& t : topology.tanks) state.levels[t.id] = 0.0;
  for (const auto& v : topology.valves) state.valve_open[v.id] = false;
  return state;
}

void check_state(const PlantState& state, const PlantTopology& topology) {
  for (const auto& [id, level] : state.levels) {
    if (!topology.has_tank(id)) {
      throw PlantError(PlantErrorCode::TopologyMismatch, fmt::format("unknown tank '{}'", id));
    }
  }
  for (const auto& [id, open] : state.valve_open) {
    if (!topology.has_valve(id)) {
      throw PlantError(PlantErrorCode::TopologyMismatch, fmt::format("unknown valve '{}'", id));
    }
  }
  for (const auto& t : topology.tanks) {
    if (!state.levels.contains(t.id)) {
      throw PlantError(PlantErrorCode::TopologyMismatch, fmt::format("missing level for {}", t.id));
    }
  }
  for (const auto& v : topology.valves) {
    if (!state.valve_open.contains(v.id)) {
      throw PlantError(PlantErrorCode::TopologyMismatch, fmt::format("missing valve {}", v.id));
    }
  }
}

double FlowBreakdown::total_leak() const {
  double sum = 0.0;
  for (const auto& [id, q] : leak) sum += q;
  return sum;
}

namespace {

struct FaultFactors {
  std::map<std::string, double> pipe;  // (1 - s_clog) per pipe
  std::map<std::string, double> leak;  // s_leak per tank
  double pump = 1.0;                   // (1 - eta * s_deg)

  double pipe_factor(const std::string& id) const {
    auto it = pipe.find(id);
    return it == pipe.end() ? 1.0 : it->second;
  }
};

FaultFactors fault_factors(const PlantState& state, const PlantTopology& topology) {
  FaultFactors f;
  for (const auto& fault : state.active_faults) {
    if (!fault_active(fault, state.time)) continue;
    switch (fault.kind) {
      case FaultKind::Clogging: {
        auto [it, inserted] = f.pipe.try_emplace(fault.location, 1.0);
        it->second *= (1.0 - fault.severity);
        break;
      }
      case FaultKind::Leakage:
        f.leak[fault.location] += fault.severity;
        break;
      case FaultKind::PumpDegradation:
        f.pump *= (1.0 - topology.degradation_efficiency * fault.severity);
        break;
    }
  }
  return f;
}

bool valve_is_open(const PlantState& state, const PipeSpec& pipe) {
  if (!pipe.valve_id) return true;
  auto it = state.valve_open.find(*pipe.valve_id);
  return it != state.valve_open.end() && it->second;
}

FlowBreakdown flows_with(const PlantState& state, const PlantTopology& topo,
                         const FaultFactors& faults) {
  FlowBreakdown out;
  auto level_of = [&](const std::string& tank) { return state.levels.at(tank); };

  // Feeders of the manifold that can currently deliver liquid.
  std::vector<const PipeSpec*> feeders;
  for (const auto& p : topo.pipes) {
    if (p.sink == kManifoldNode && valve_is_open(state, p) && topo.has_tank(p.source) &&
        level_of(p.source) > 0.0) {
      feeders.push_back(&p);
    }
  }

  for (const auto& p : topo.pipes) {
    double q = 0.0;
    if (p.pumped) {
      if (valve_is_open(state, p) && !feeders.empty()) {
        const double demand = topo.pump.q_max * state.pump_power * faults.pump * faults.pipe_factor(p.id);
        const double share = demand / static_cast<double>(feeders.size());
        for (const PipeSpec* feeder : feeders) {
          const double qf = share * faults.pipe_factor(feeder->id);
          out.pipe_flow[feeder->id] = qf;
          q += qf;
        }
      }
      out.pipe_flow[p.id] = q;
      out.transfer_flow += q;
      continue;
    }
    if (p.sink == kManifoldNode) {
      out.pipe_flow.try_emplace(p.id, 0.0);  // set by the pumped pipe
      continue;
    }
    if (valve_is_open(state, p)) {
      const double conductance = topo.valve(*p.valve_id).conductance;
      if (p.source == kSupplyNode) {
        q = conductance * faults.pipe_factor(p.id);
      } else if (topo.has_tank(p.source) && level_of(p.source) > 0.0) {
        q = conductance * faults.pipe_factor(p.id);
      }
    }
    out.pipe_flow[p.id] = q;
  }

  for (const auto& t : topo.tanks) {
    auto it = faults.leak.find(t.id);
    const double severity = it == faults.leak.end() ? 0.0 : it->second;
    out.leak[t.id] = topo.leak_coefficient * severity * std::sqrt(std::max(level_of(t.id), 0.0));
  }

  for (const auto& p : topo.pipes) {
    if (p.source == kSupplyNode) out.boundary_inflow += out.pipe_flow[p.id];
    if (p.sink == kDrainNode) out.boundary_outflow += out.pipe_flow[p.id];
  }
  return out;
}

}  // namespace

FlowBreakdown compute_flows(const PlantState& state, const PlantTopology& topology) {
  return flows_with(state, topology, fault_factors(state, topology));
}

FlowBreakdown nominal_flows(const PlantState& state, const PlantTopology& topology) {
  return flows_with(state, topology, FaultFactors{});
}

StepResult step_detailed(const PlantState& state, const PlantTopology& topo, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw PlantError(PlantErrorCode::InvalidTimestep, fmt::format("dt must be > 0, got {}", dt));
  }
  check_state(state, topo);

  FlowBreakdown flows = compute_flows(state, topo);

  // Cap each tank's outflows to the volume it holds.
  for (const auto& t : topo.tanks) {
    double demand = flows.leak[t.id];
    for (const auto& p : topo.pipes) {
      if (p.source == t.id) demand += flows.pipe_flow[p.id];
    }
    const double available = std::max(state.levels.at(t.id), 0.0) * t.area / dt;
    if (demand > available) {
      const double scale = available / demand;
      flows.leak[t.id] *= scale;
      for (const auto& p : topo.pipes) {
        if (p.source == t.id) flows.pipe_flow[p.id] *= scale;
      }
    }
  }
  // Re-derive aggregate flows from the capped per-pipe values.
  flows.transfer_flow = 0.0;
  flows.boundary_inflow = 0.0;
  flows.boundary_outflow = 0.0;
  for (const auto& p : topo.pipes) {
    if (p.pumped) {
      double q = 0.0;
      for (const auto& f : topo.pipes) {
        if (f.sink == kManifoldNode) q += flows.pipe_flow[f.id];
      }
      flows.pipe_flow[p.id] = q;
      flows.transfer_flow += q;
    }
  }
  for (const auto& p : topo.pipes) {
    if (p.source == kSupplyNode) flows.boundary_inflow += flows.pipe_flow[p.id];
    if (p.sink == kDrainNode) flows.boundary_outflow += flows.pipe_flow[p.id];
  }

  StepResult result{state, flows};
  PlantState& next = result.state;
  next.overflowed.clear();
  for (const auto& t : topo.tanks) {
    double net = -flows.leak[t.id];
    for (const auto& p : topo.pipes) {
      if (p.sink == t.id) net += flows.pipe_flow[p.id];
      if (p.source == t.id) net -= flows.pipe_flow[p.id];
    }
    double level = state.levels.at(t.id) + net * dt / t.area;
    if (level > t.h_max) {
      level = t.h_max;
      next.overflowed.insert(t.id);
    } else if (level < 0.0) {
      level = 0.0;
    }
    next.levels[t.id] = level;
  }
  next.time = state.time + dt;
  return result;
}

PlantState step(const PlantState& state, const PlantTopology& topology, double dt) {
  return step_detailed(state, topology, dt).state;
}

SensorReadings read_sensors(const PlantState& state, const PlantTopology& topology) {
  SensorReadings r;
  const FlowBreakdown flows = compute_flows(state, topology);
  for (const auto& s : topology.sensors) {
    switch (s.kind) {
      case SensorKind::DiscreteHigh: {
        const auto& t = topology.tank(s.target);
        r.discrete_levels[s.id] = state.levels.at(t.id) >= t.level_high_threshold;
        break;
      }
      case SensorKind::DiscreteLow: {
        const auto& t = topology.tank(s.target);
        r.discrete_levels[s.id] = state.levels.at(t.id) <= t.level_low_threshold;
        break;
      }
      case SensorKind::Pressure:
        r.pressures[s.id] = kWaterDensity * kGravity * std::max(state.levels.at(s.target), 0.0);
        break;
      case SensorKind::VolumeFlow: {
        auto it = flows.pipe_flow.find(s.target);
        r.volume_flow_rate = it == flows.pipe_flow.end() ? 0.0 : std::max(it->second, 0.0);
        break;
      }
    }
  }
  return r;
}

namespace {

enum class ActionProblem { None, Unknown, Conflict, Power };

ActionProblem classify(const Action& a, const PlantTopology& topo) {
  if (topo.is_pump(a.actuator)) {
    if (a.command != Command::SetPower) return ActionProblem::Unknown;
    if (!(a.power >= 0.0 && a.power <= 1.0)) return ActionProblem::Power;
    return ActionProblem::None;
  }
  if (!topo.has_valve(a.actuator) || a.command == Command::SetPower) return ActionProblem::Unknown;
  return ActionProblem::None;
}

void apply_one(PlantState& state, const Action& a) {
  if (a.command == Command::SetPower) {
    state.pump_power = a.power;
  } else {
    state.valve_open[a.actuator] = a.command == Command::Open;
  }
}

std::string describe(const Action& a) { return format_action(a); }

}  // namespace

PlantState apply_actions(const PlantState& state, const PlantTopology& topology,
                         std::span<const Action> actions) {
  std::set<std::string> seen;
  for (const auto& a : actions) {
    switch (classify(a, topology)) {
      case ActionProblem::Unknown:
        throw PlantError(PlantErrorCode::UnknownActuator, describe(a));
      case ActionProblem::Power:
        throw PlantError(PlantErrorCode::PowerOutOfBounds, describe(a));
      default:
        break;
    }
    if (!seen.insert(a.actuator).second) {
      throw PlantError(PlantErrorCode::ConflictingActions,
                       fmt::format("more than one command for {}", a.actuator));
    }
  }
  PlantState next = state;
  for (const auto& a : actions) apply_one(next, a);
  return next;
}

LenientApplyResult apply_actions_lenient(const PlantState& state, const PlantTopology& topology,
                                         std::span<const Action> actions) {
  LenientApplyResult result{state, {}, {}};
  std::set<std::string> seen;
  for (const auto& a : actions) {
    if (classify(a, topology) != ActionProblem::None || !seen.insert(a.actuator).second) {
      result.dropped.push_back(a);
      continue;
    }
    apply_one(result.state, a);
    result.applied.push_back(a);
  }
  return result;
}

void validate_fault(const FaultConfig& fault, const PlantTopology& topology) {
  if (!(fault.severity >= 0.0 && fault.severity <= 1.0)) {
    throw PlantError(PlantErrorCode::InvalidFault,
                     fmt::format("severity {} outside [0, 1]", fault.severity));
  }
  if (!std::isfinite(fault.onset_time)) {
    throw PlantError(PlantErrorCode::InvalidFault, "onset time must be finite");
  }
  bool location_ok = false;
  switch (fault.kind) {
    case FaultKind::Clogging: location_ok = topology.has_pipe(fault.location); break;
    case FaultKind::Leakage: location_ok = topology.has_tank(fault.location); break;
    case FaultKind::PumpDegradation: location_ok = topology.is_pump(fault.location); break;
  }
  if (!location_ok) {
    throw PlantError(PlantErrorCode::InvalidFault,
                     fmt::format("{} fault cannot be located at '{}'", to_string(fault.kind),
                                 fault.location));
  }
}

PlantState inject_fault(const PlantState& state, const PlantTopology& topology,
                        const FaultConfig& fault) {
  validate_fault(fault, topology);
  for (const auto& f : state.active_faults) {
    if (f.kind == fault.kind && f.location == fault.location) {
      throw PlantError(PlantErrorCode::DuplicateFault,
                       fmt::format("{} at {} already active", to_string(fault.kind), fault.location));
    }
  }
  PlantState next = state;
  next.active_faults.push_back(fault);
  return next;
}

}  // namespace twinloop
