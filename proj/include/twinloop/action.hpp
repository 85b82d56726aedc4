#pragma once

#include <string>
#include <vector>

namespace twinloop {

enum class Command { Open, Close, SetPower };

/// One actuator command, e.g. "valve_in0 - close" or "pump_P101 - set_power 0.8".
struct Action {
  std::string actuator;
  Command command = Command::Open;
  double power = 0.0;  // only meaningful for SetPower

  static Action open(std::string id) { return {std::move(id), Command::Open, 0.0}; }
  static Action close(std::string id) { return {std::move(id), Command::Close, 0.0}; }
  static Action set_power(std::string id, double power) {
    return {std::move(id), Command::SetPower, power};
  }

  friend bool operator==(const Action&, const Action&) = default;
};

using ActionList = std::vector<Action>;

/// Renders one action in the line grammar `<actuator> - <command>`. Powers use
/// the shortest representation that parses back to the same double.
std::string format_action(const Action& action);

/// One action per line, newline-terminated.
std::string format_actions(const ActionList& actions);

/// Single-line form joined with "; ", used in CSV cells and prompt feedback.
std::string join_actions(const ActionList& actions);

}  // namespace twinloop
