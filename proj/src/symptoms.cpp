#include "twinloop/symptoms.hpp"

namespace twinloop {

SymptomList detect_symptoms(const SensorReadings& readings, const PlantState& state,
                            const PlantTopology& topology, double threshold) {
  SymptomList symptoms;
  const bool pump_on = state.pump_power > 0.0;
  auto it = state.valve_open.find(std::string(kTransferValve));
  const bool transfer_open = it != state.valve_open.end() && it->second;
  if (!pump_on || !transfer_open) return symptoms;

  const double expected = nominal_flows(state, topology).transfer_flow;
  if (!(expected > 0.0)) return symptoms;
  const double measured = readings.volume_flow_rate;
  if (measured < (1.0 - threshold) * expected) {
    symptoms.push_back(Symptom{FaultKind::Clogging, 1.0 - measured / expected, expected, measured});
  }
  return symptoms;
}

}  // namespace twinloop
