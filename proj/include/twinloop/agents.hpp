#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "twinloop/prompt.hpp"
#include "twinloop/proposal.hpp"
#include "twinloop/symptoms.hpp"
#include "twinloop/twin.hpp"

namespace twinloop {

/// Parses an agent response. Accepted lines have the form
/// `<actuator_id> - open | close | set_power <fraction>`; keywords are
/// case-insensitive and leading bullets or numbering are stripped. When the
/// response contains an "Actions:" line, only the lines after it are parsed
/// and the text before it becomes the rationale. A lone "none" means an empty
/// list. Any other non-blank line rejects the whole response.
/// Throws BackendError(Unparseable).
ActionList parse_actions(std::string_view raw, std::string* rationale = nullptr);

/// Maps actuator ids onto the topology's spelling (case-insensitive match).
/// Unknown ids are left as written so validation can report them.
ActionList canonicalize(ActionList actions, const PlantTopology& topology);

struct RepromptContext {
  ActionProposal prior_proposal;
  std::vector<ValidationViolation> violations;
  std::string twin_feedback;
  int attempt_index = 1;
  int max_itr = 0;
};

/// Lines of the [Validation Feedback] subsection.
std::vector<std::string> feedback_lines(const RepromptContext& ctx);

struct DecisionInput {
  const PlantState& state;
  const SymptomList& symptoms;
};

/// Common interface of every decision backend.
class DecisionBackend {
 public:
  virtual ~DecisionBackend() = default;

  virtual std::string id() const = 0;

  ActionProposal propose(const PromptBundle& prompt, const DecisionInput& input);

  /// Refines a rejected proposal. Throws std::invalid_argument when the
  /// attempt index is outside [1, max_itr].
  ActionProposal reprompt(const RepromptContext& ctx, const PromptBundle& prompt,
                          const DecisionInput& input);

 protected:
  virtual ActionProposal respond(const PromptBundle& prompt, const DecisionInput& input,
                                 bool refinement) = 0;
};

/// Deterministic rule-based operator: follows the sequence state machine and
/// raises pump power to u_nom / (1 - s) on a clogging symptom.
class OracleBackend final : public DecisionBackend {
 public:
  explicit OracleBackend(KnowledgeBase kb);

  std::string id() const override { return "oracle"; }

  /// Step the plant is currently in (1..9), or 0 before the sequence starts.
  /// Returns -1 for configurations the sequence never produces.
  int infer_step(const PlantState& state) const;

  ActionList decide(const PlantState& state, const SymptomList& symptoms) const;

 protected:
  ActionProposal respond(const PromptBundle& prompt, const DecisionInput& input,
                         bool refinement) override;

 private:
  KnowledgeBase kb_;
};

/// Replays canned responses in order. Entries of the form "!timeout" or
/// "!protocol" raise the corresponding BackendError. Once the script is
/// exhausted, calls go to the fallback backend (if any).
class ScriptedBackend final : public DecisionBackend {
 public:
  ScriptedBackend(std::vector<std::string> responses, const PlantTopology& topology,
                  std::unique_ptr<DecisionBackend> fallback = nullptr);

  std::string id() const override { return "scripted"; }
  std::size_t consumed() const { return next_; }

 protected:
  ActionProposal respond(const PromptBundle& prompt, const DecisionInput& input,
                         bool refinement) override;

 private:
  std::vector<std::string> responses_;
  PlantTopology topology_;
  std::unique_ptr<DecisionBackend> fallback_;
  std::size_t next_ = 0;
};

struct RemoteBackendConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4o";
  std::string strategy_model = "gpt-4o";
  double timeout_s = 60.0;
  std::string api_key;
};

/// Chat-completions client: one request per call, temperature 0.
class RemoteBackend final : public DecisionBackend {
 public:
  RemoteBackend(RemoteBackendConfig config, const PlantTopology& topology);

  std::string id() const override { return "llm:" + config_.model; }

  /// JSON request body for one call; exposed for inspection and tests.
  std::string request_body(const PromptBundle& prompt, bool refinement) const;

 protected:
  ActionProposal respond(const PromptBundle& prompt, const DecisionInput& input,
                         bool refinement) override;

 private:
  RemoteBackendConfig config_;
  PlantTopology topology_;
};

/// Environment variable holding the remote API credential.
inline constexpr const char* kApiKeyVariable = "AGENT_API_KEY";

}  // namespace twinloop
