#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "twinloop/action.hpp"
#include "twinloop/plant.hpp"

namespace twinloop {

enum class GuardKind { FlagTrue, AtLeast, AtMost };

/// Transition condition on one sensor.
struct Guard {
  std::string sensor;
  GuardKind kind = GuardKind::FlagTrue;
  double threshold = 0.0;  // Pa or m^3/s for continuous sensors
};

bool guard_holds(const Guard& guard, const SensorReadings& readings);
std::string describe(const Guard& guard);

struct SequenceStep {
  int index = 0;  // 1-based
  std::string name;
  std::string description;
  ActionList entry_actions;
  std::optional<Guard> exit_guard;  // absent on the terminal step
  double pump_setpoint = 0.0;       // nominal pump power while the step is active
};

struct StateMachine {
  std::vector<SequenceStep> steps;

  const SequenceStep& at(int index) const { return steps.at(static_cast<std::size_t>(index - 1)); }
};

/// Structure, function and behavior of the plant, as handed to the prompt engine.
struct KnowledgeBase {
  PlantTopology topology;
  std::string function_text;
  StateMachine behavior_machine;
  double target_level_B204 = 0.245;
};

inline constexpr double kNominalTransferPower = 0.5;

/// The nine-step batch sequence: three fill/transfer pairs, settle, residual
/// transfer, complete.
KnowledgeBase default_knowledge_base(const PlantTopology& topology, double target_level_B204);

/// Throws PlantError(InvalidTopology) when a guard names an unknown sensor or an
/// entry action an unknown actuator.
void validate_knowledge_base(const KnowledgeBase& kb);

/// Valve/pump configuration a step establishes, obtained by replaying the
/// entry actions of steps 1..index from an all-closed plant.
struct ActuatorConfig {
  std::map<std::string, bool> valve_open;
  bool pump_on = false;

  friend bool operator==(const ActuatorConfig&, const ActuatorConfig&) = default;
};

ActuatorConfig step_configuration(const KnowledgeBase& kb, int index);
ActuatorConfig current_configuration(const PlantState& state);

struct TwinPrediction {
  std::vector<PlantState> trajectory;
  double horizon = 0.0;
  ActionList triggering_actions;

  std::set<std::string> overflowed_tanks() const;
};

enum class TwinMode { Mirror, Blind };

std::string_view to_string(TwinMode mode);
std::optional<TwinMode> twin_mode_from_string(std::string_view name);

/// Shadow replica of the plant. Predictions use the plant's own integrator.
class DigitalTwin {
 public:
  DigitalTwin(KnowledgeBase kb, TwinMode mode, double dt);

  /// Replaces the base state. In blind mode the fault list is dropped.
  void sync(const PlantState& plant_state);

  /// Applies `actions` to the base state and integrates for `horizon` seconds.
  /// A zero horizon yields the post-action state alone; otherwise the
  /// trajectory holds the horizon/dt states after each step.
  TwinPrediction predict(std::span<const Action> actions, double horizon) const;

  const PlantState& base_state() const { return base_; }
  const KnowledgeBase& knowledge() const { return kb_; }
  const PlantTopology& topology() const { return kb_.topology; }
  TwinMode mode() const { return mode_; }
  double dt() const { return dt_; }

  friend bool operator==(const DigitalTwin& a, const DigitalTwin& b) {
    return a.base_ == b.base_ && a.mode_ == b.mode_ && a.dt_ == b.dt_;
  }

 private:
  KnowledgeBase kb_;
  TwinMode mode_;
  double dt_;
  PlantState base_;
};

/// Number of whole dt steps in `horizon`; throws PlantError(InvalidHorizon)
/// unless horizon >= 0 and an integer multiple of dt.
long horizon_steps(double horizon, double dt);

/// One-line summary used in reprompt feedback.
std::string summarize(const TwinPrediction& prediction, const PlantTopology& topology);

}  // namespace twinloop
