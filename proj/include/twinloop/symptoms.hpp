#pragma once

#include <vector>

#include "twinloop/plant.hpp"

namespace twinloop {

/// A deviation from nominal behavior flagged by the monitoring stage.
struct Symptom {
  FaultKind kind = FaultKind::Clogging;
  double severity_estimate = 0.0;  // 1 - measured/expected
  double expected_flow = 0.0;
  double measured_flow = 0.0;

  friend bool operator==(const Symptom&, const Symptom&) = default;
};

using SymptomList = std::vector<Symptom>;

/// Flags a clogging symptom when the pump runs into an open transfer line and
/// the measured flow falls below (1 - threshold) of the fault-free flow.
SymptomList detect_symptoms(const SensorReadings& readings, const PlantState& state,
                            const PlantTopology& topology, double threshold);

}  // namespace twinloop
