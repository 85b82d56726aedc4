#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "twinloop/symptoms.hpp"
#include "twinloop/twin.hpp"

namespace twinloop {

/// How the plant description section is written.
enum class Representation { Text, SimCode, StateGraph };

std::string_view to_string(Representation repr);
std::optional<Representation> representation_from_string(std::string_view name);

/// Contents of the <Agent Description> and <Agent Action> sections.
struct AgentProfile {
  std::string role;
  std::string goal;
  std::vector<std::string> task;
  std::vector<std::string> skills;
  std::vector<std::string> expected_output;
};

/// Operator profile used for first proposals.
AgentProfile default_operator_profile();
/// Strategy profile used when a rejected proposal is refined.
AgentProfile default_strategist_profile();

struct PlantDescription {
  std::string function;
  std::string structure;
  std::string behavior;
  std::string current_state;
};

struct PromptBundle {
  AgentProfile agent;
  PlantDescription plant;
  Representation representation = Representation::Text;
  std::string rendered_text;
  std::size_t token_estimate = 0;
};

inline constexpr std::string_view kAgentDescriptionHeader = "<Agent Description>";
inline constexpr std::string_view kPlantDescriptionHeader = "<Plant Description>";
inline constexpr std::string_view kAgentActionHeader = "<Agent Action>";
inline constexpr std::string_view kFeedbackHeader = "[Validation Feedback]";

PromptBundle render(const KnowledgeBase& kb, const PlantState& state, Representation repr,
                    const AgentProfile& profile, const SymptomList& symptoms = {});

/// Approximate token count: ceil(characters / 4), counting UTF-8 code points.
std::size_t estimate_tokens(std::string_view text);

/// Static structure/behavior text for one representation (no current state).
std::string render_structure(const KnowledgeBase& kb, Representation repr);
std::string render_behavior(const KnowledgeBase& kb, Representation repr);
std::string render_current_state(const KnowledgeBase& kb, const PlantState& state,
                                 const SymptomList& symptoms);

/// Copy of `bundle` whose rendered text ends with a [Validation Feedback]
/// subsection holding `lines`.
PromptBundle with_feedback(const PromptBundle& bundle, const std::vector<std::string>& lines);

}  // namespace twinloop
