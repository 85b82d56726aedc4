#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "twinloop/control_loop.hpp"

namespace twinloop {

enum class BackendKind { Oracle, Scripted, Llm };

std::string_view to_string(BackendKind kind);
std::optional<BackendKind> backend_kind_from_string(std::string_view name);

struct BackendConfig {
  BackendKind kind = BackendKind::Oracle;
  RemoteBackendConfig remote;         // api_key is never read from the file
  std::vector<std::string> script;    // scripted backend responses
  bool script_fallback_oracle = true; // hand over to the oracle once the script runs out
};

struct ExperimentConfig {
  Scenario scenario = default_scenario();
  RunSetup setup;
  BackendConfig backend;
  std::optional<std::filesystem::path> expected_trace;
};

/// Command-line overrides; each one replaces a single documented key.
struct ConfigOverrides {
  std::optional<std::string> backend;         // backend.kind
  std::optional<std::string> representation;  // prompt.representation
  std::optional<std::string> fault_kind;      // scenario.faults (replaced by one fault)
  std::optional<double> fault_severity;
  std::optional<double> fault_onset;
};

/// Throws ConfigError (with the offending key path) or IoError.
ExperimentConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

/// Same as load_config for an in-memory document; relative file references
/// resolve against `base_dir`.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                              const ConfigOverrides& overrides = {});

/// Reads agent and task profile documents (YAML). Throws ConfigError.
void load_profiles(const std::filesystem::path& agents_file, const std::filesystem::path& tasks_file,
                   AgentProfile& operator_profile, AgentProfile& strategist_profile);

/// Default fault location for each kind.
std::string default_fault_location(FaultKind kind);

/// Builds the configured backend. The remote backend reads its key from
/// AGENT_API_KEY and throws ConfigError naming the variable when it is unset.
std::unique_ptr<DecisionBackend> make_backend(const BackendConfig& config, const KnowledgeBase& kb);

}  // namespace twinloop
