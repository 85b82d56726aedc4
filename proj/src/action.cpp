#include "twinloop/action.hpp"

#include <fmt/format.h>

namespace twinloop {

std::string format_action(const Action& action) {
  switch (action.command) {
    case Command::Open: return action.actuator + " - open";
    case Command::Close: return action.actuator + " - close";
    case Command::SetPower: return fmt::format("{} - set_power {}", action.actuator, action.power);
  }
  return action.actuator;
}

std::string format_actions(const ActionList& actions) {
  std::string out;
  for (const auto& a : actions) {
    out += format_action(a);
    out += '\n';
  }
  return out;
}

std::string join_actions(const ActionList& actions) {
  std::string out;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (i != 0) out += "; ";
    out += format_action(actions[i]);
  }
  return out;
}

}  // namespace twinloop
