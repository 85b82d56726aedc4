#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "twinloop/action.hpp"

namespace twinloop {

struct ActionProposal {
  ActionList actions;
  std::string rationale;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  std::string backend_id;
  /// Set when the backend failed or its answer could not be parsed; the
  /// proposal is then rejected without simulation.
  std::optional<std::string> backend_error;
};

enum class ViolationCode {
  UnknownActuator,
  PumpPowerOutOfBounds,
  ConflictingActions,
  PredictedOverflow,
  NoProgress,
  MalformedProposal,
};

std::string_view to_string(ViolationCode code);

struct ValidationViolation {
  ViolationCode code = ViolationCode::UnknownActuator;
  std::string detail;
  std::optional<std::string> actuator;  // tank id for PredictedOverflow

  friend bool operator==(const ValidationViolation&, const ValidationViolation&) = default;
};

/// "Code(actuator): detail"
std::string format_violation(const ValidationViolation& v);

}  // namespace twinloop
