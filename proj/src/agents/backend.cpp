#include <stdexcept>

#include <fmt/format.h>

#include "twinloop/agents.hpp"

namespace twinloop {

std::string_view to_string(ViolationCode code) {
  switch (code) {
    case ViolationCode::UnknownActuator: return "UnknownActuator";
    case ViolationCode::PumpPowerOutOfBounds: return "PumpPowerOutOfBounds";
    case ViolationCode::ConflictingActions: return "ConflictingActions";
    case ViolationCode::PredictedOverflow: return "PredictedOverflow";
    case ViolationCode::NoProgress: return "NoProgress";
    case ViolationCode::MalformedProposal: return "MalformedProposal";
  }
  return "Unknown";
}

std::string format_violation(const ValidationViolation& v) {
  std::string out{to_string(v.code)};
  if (v.actuator) out += "(" + *v.actuator + ")";
  if (!v.detail.empty()) out += ": " + v.detail;
  return out;
}

std::vector<std::string> feedback_lines(const RepromptContext& ctx) {
  std::vector<std::string> lines;
  lines.push_back(fmt::format("Attempt {} of {}: the previous proposal was rejected.",
                              ctx.attempt_index, ctx.max_itr));
  lines.push_back("Previous proposal: " + (ctx.prior_proposal.actions.empty()
                                               ? std::string("none")
                                               : join_actions(ctx.prior_proposal.actions)));
  for (const auto& v : ctx.violations) lines.push_back("Violation " + format_violation(v));
  if (!ctx.twin_feedback.empty()) lines.push_back("Simulation: " + ctx.twin_feedback);
  lines.push_back("Return a corrected action list in the expected output format.");
  return lines;
}

ActionProposal DecisionBackend::propose(const PromptBundle& prompt, const DecisionInput& input) {
  ActionProposal p = respond(prompt, input, false);
  if (p.backend_id.empty()) p.backend_id = id();
  return p;
}

ActionProposal DecisionBackend::reprompt(const RepromptContext& ctx, const PromptBundle& prompt,
                                         const DecisionInput& input) {
  if (ctx.attempt_index < 1 || ctx.attempt_index > ctx.max_itr) {
    throw std::invalid_argument(
        fmt::format("reprompt attempt {} outside [1, {}]", ctx.attempt_index, ctx.max_itr));
  }
  const PromptBundle refined = with_feedback(prompt, feedback_lines(ctx));
  ActionProposal p = respond(refined, input, true);
  if (p.backend_id.empty()) p.backend_id = id();
  return p;
}

}  // namespace twinloop
