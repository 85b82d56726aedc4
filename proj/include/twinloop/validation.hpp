#pragma once

#include <vector>

#include "twinloop/proposal.hpp"
#include "twinloop/twin.hpp"

namespace twinloop {

struct CostWeights {
  double overflow_margin = 1.0;
  double pump_energy = 1.0;
  double action_count = 0.1;
};

struct RuleConfig {
  double horizon = 20.0;     // s of twin simulation per proposal
  bool no_progress = false;  // require B204 to rise during transfers
  CostWeights cost_weights;
};

struct ValidationVerdict {
  bool valid = true;
  std::vector<ValidationViolation> violations;
  TwinPrediction prediction;
  /// Informational score; never affects `valid`.
  double cost = 0.0;
};

/// Checks, in order: actuator existence, pump power bounds, duplicate commands,
/// twin-predicted overflow, and (when enabled) progress of B204. All violations
/// are collected. The twin simulates the structurally valid subset of actions.
ValidationVerdict validate(const ActionProposal& proposal, const DigitalTwin& twin,
                           const RuleConfig& rules);

/// Verdict for a proposal that never produced actions (backend failure).
ValidationVerdict reject_malformed(const ActionProposal& proposal);

/// Peak fill fraction + pump energy (sum of u^2 dt) + action count, weighted.
double proposal_cost(const TwinPrediction& prediction, std::size_t action_count,
                     const PlantTopology& topology, double dt, const CostWeights& weights);

}  // namespace twinloop
