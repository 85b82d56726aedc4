#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "twinloop/action.hpp"

namespace twinloop {

inline constexpr double kWaterDensity = 1000.0;  // kg/m^3
inline constexpr double kGravity = 9.81;         // m/s^2

inline constexpr std::string_view kPumpId = "pump_P101";
inline constexpr std::string_view kTransferValve = "valve_transfer";
inline constexpr std::string_view kTransferPipe = "pipe_transfer";
inline constexpr std::string_view kCollectorTank = "B204";
inline constexpr std::string_view kFlowSensor = "sensor_continuous_volumeFlowRate";

/// Pseudo-nodes that pipes may use as endpoints besides tanks.
inline constexpr std::string_view kSupplyNode = "supply";
inline constexpr std::string_view kManifoldNode = "manifold";
inline constexpr std::string_view kDrainNode = "drain";

struct TankSpec {
  std::string id;
  double area = 0.01;                 // m^2
  double h_max = 0.3;                 // m
  double level_high_threshold = 0.25; // m
  double level_low_threshold = 0.01;  // m
};

struct ValveSpec {
  std::string id;
  double conductance = 1e-4;  // m^3/s when fully open
};

struct PumpSpec {
  std::string id{kPumpId};
  double q_max = 2e-4;  // m^3/s at power 1.0
};

struct PipeSpec {
  std::string id;
  std::string source;
  std::string sink;
  std::optional<std::string> valve_id;
  bool pumped = false;
};

enum class SensorKind { DiscreteHigh, DiscreteLow, Pressure, VolumeFlow };

struct SensorSpec {
  std::string id;
  SensorKind kind = SensorKind::Pressure;
  std::string target;  // tank id, or pipe id for the flow sensor
};

struct PlantTopology {
  std::vector<TankSpec> tanks;
  std::vector<ValveSpec> valves;
  PumpSpec pump;
  std::vector<PipeSpec> pipes;
  std::vector<SensorSpec> sensors;
  double leak_coefficient = 1e-4;      // m^2.5/s
  double degradation_efficiency = 1.0; // fraction of pump severity that reaches the flow

  const TankSpec& tank(std::string_view id) const;
  const ValveSpec& valve(std::string_view id) const;
  const PipeSpec& pipe(std::string_view id) const;
  bool has_tank(std::string_view id) const;
  bool has_valve(std::string_view id) const;
  bool has_pipe(std::string_view id) const;
  bool has_sensor(std::string_view id) const;
  bool has_actuator(std::string_view id) const;
  bool is_pump(std::string_view id) const { return id == pump.id; }
};

/// The mixing module: B201..B203 feed a pumped manifold into B204.
PlantTopology default_topology();

/// Checks every topology invariant; throws PlantError(InvalidTopology).
void validate_topology(const PlantTopology& topology);

enum class FaultKind { Clogging, Leakage, PumpDegradation };

std::string_view to_string(FaultKind kind);
std::optional<FaultKind> fault_kind_from_string(std::string_view name);

struct FaultConfig {
  FaultKind kind = FaultKind::Clogging;
  double severity = 0.0;  // [0, 1]
  std::string location;   // pipe id, tank id or pump id depending on kind
  double onset_time = 0.0;

  friend bool operator==(const FaultConfig&, const FaultConfig&) = default;
};

struct PlantState {
  double time = 0.0;
  std::map<std::string, double> levels;
  std::map<std::string, bool> valve_open;
  double pump_power = 0.0;
  std::vector<FaultConfig> active_faults;
  /// Tanks clamped at h_max during the step that produced this state.
  std::set<std::string> overflowed;

  friend bool operator==(const PlantState&, const PlantState&) = default;
};

/// All tanks empty, all valves closed, pump off.
PlantState initial_state(const PlantTopology& topology);

/// Throws PlantError(TopologyMismatch) when ids do not line up with the topology.
void check_state(const PlantState& state, const PlantTopology& topology);

/// Volumetric flows implied by a state. `compute_flows` gives the
/// instantaneous rates the sensors see; `StepResult::flows` holds the rates
/// actually integrated, which are capped by the volume left in each tank.
struct FlowBreakdown {
  std::map<std::string, double> pipe_flow;  // m^3/s per pipe id
  std::map<std::string, double> leak;       // m^3/s per tank id
  double boundary_inflow = 0.0;             // from supply
  double boundary_outflow = 0.0;            // to drain
  double transfer_flow = 0.0;               // into the collector tank through the pump

  double total_leak() const;
};

FlowBreakdown compute_flows(const PlantState& state, const PlantTopology& topology);

/// Fault-free flows for the same actuator configuration (nominal model).
FlowBreakdown nominal_flows(const PlantState& state, const PlantTopology& topology);

struct StepResult {
  PlantState state;
  FlowBreakdown flows;
};

StepResult step_detailed(const PlantState& state, const PlantTopology& topology, double dt);

/// Advances the plant by one explicit Euler step. Pure: identical inputs give
/// bit-identical outputs.
PlantState step(const PlantState& state, const PlantTopology& topology, double dt);

struct SensorReadings {
  std::map<std::string, bool> discrete_levels;
  std::map<std::string, double> pressures;  // Pa
  double volume_flow_rate = 0.0;            // m^3/s

  friend bool operator==(const SensorReadings&, const SensorReadings&) = default;
};

SensorReadings read_sensors(const PlantState& state, const PlantTopology& topology);

std::string high_sensor_id(std::string_view tank);
std::string low_sensor_id(std::string_view tank);
std::string pressure_sensor_id(std::string_view tank);

PlantState apply_actions(const PlantState& state, const PlantTopology& topology,
                         std::span<const Action> actions);

/// Forced-execution variant: commands the plant would reject are skipped and
/// reported instead of thrown.
struct LenientApplyResult {
  PlantState state;
  ActionList applied;
  ActionList dropped;
};

LenientApplyResult apply_actions_lenient(const PlantState& state, const PlantTopology& topology,
                                         std::span<const Action> actions);

PlantState inject_fault(const PlantState& state, const PlantTopology& topology,
                        const FaultConfig& fault);

/// Throws PlantError(InvalidFault) when severity or location do not fit the kind.
void validate_fault(const FaultConfig& fault, const PlantTopology& topology);

/// True once `fault` has started at `time`.
inline bool fault_active(const FaultConfig& fault, double time) {
  return time >= fault.onset_time;
}

}  // namespace twinloop
