#include "twinloop/agents.hpp"
#include "twinloop/error.hpp"

namespace twinloop {

ScriptedBackend::ScriptedBackend(std::vector<std::string> responses, const PlantTopology& topology,
                                 std::unique_ptr<DecisionBackend> fallback)
    : responses_(std::move(responses)), topology_(topology), fallback_(std::move(fallback)) {}

ActionProposal ScriptedBackend::respond(const PromptBundle& prompt, const DecisionInput& input,
                                        bool /*refinement*/) {
  if (next_ >= responses_.size()) {
    if (!fallback_) throw BackendError(BackendErrorKind::Protocol, "script exhausted");
    return fallback_->propose(prompt, input);
  }
  const std::string& raw = responses_[next_++];
  if (raw == "!timeout") throw BackendError(BackendErrorKind::Timeout, "scripted timeout");
  if (raw == "!protocol") throw BackendError(BackendErrorKind::Protocol, "scripted protocol error");

  ActionProposal p;
  p.actions = canonicalize(parse_actions(raw, &p.rationale), topology_);
  p.prompt_tokens = prompt.token_estimate;
  p.completion_tokens = estimate_tokens(raw);
  p.backend_id = id();
  return p;
}

}  // namespace twinloop
