#include "twinloop/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "twinloop/error.hpp"

namespace twinloop {

using nlohmann::json;

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Oracle: return "oracle";
    case BackendKind::Scripted: return "scripted";
    case BackendKind::Llm: return "llm";
  }
  return "oracle";
}

std::optional<BackendKind> backend_kind_from_string(std::string_view name) {
  if (name == "oracle") return BackendKind::Oracle;
  if (name == "scripted") return BackendKind::Scripted;
  if (name == "llm") return BackendKind::Llm;
  return std::nullopt;
}

std::string default_fault_location(FaultKind kind) {
  switch (kind) {
    case FaultKind::Clogging: return std::string(kTransferPipe);
    case FaultKind::Leakage: return "B201";
    case FaultKind::PumpDegradation: return std::string(kPumpId);
  }
  return {};
}

namespace {

std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

/// A JSON object plus its key path; rejects keys it was never asked about.
class Section {
 public:
  Section(const json& node, std::string path, std::set<std::string> allowed)
      : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_, "expected an object");
    for (const auto& [key, value] : node_.items()) {
      if (!allowed.count(key)) throw ConfigError(join_path(path_, key), "unknown key");
    }
  }

  bool has(const std::string& key) const { return node_.contains(key); }
  const json& at(const std::string& key) const { return node_.at(key); }
  std::string path(const std::string& key) const { return join_path(path_, key); }

  void number(const std::string& key, double& out) const {
    if (!has(key)) return;
    if (!at(key).is_number()) throw ConfigError(path(key), "expected a number");
    out = at(key).get<double>();
  }
  void integer(const std::string& key, int& out) const {
    if (!has(key)) return;
    if (!at(key).is_number_integer()) throw ConfigError(path(key), "expected an integer");
    out = at(key).get<int>();
  }
  void boolean(const std::string& key, bool& out) const {
    if (!has(key)) return;
    if (!at(key).is_boolean()) throw ConfigError(path(key), "expected true or false");
    out = at(key).get<bool>();
  }
  void string(const std::string& key, std::string& out) const {
    if (!has(key)) return;
    if (!at(key).is_string()) throw ConfigError(path(key), "expected a string");
    out = at(key).get<std::string>();
  }

 private:
  const json& node_;
  std::string path_;
};

void require_positive(double v, const std::string& path) {
  if (!(v > 0.0)) throw ConfigError(path, fmt::format("must be > 0, got {}", v));
}

void read_plant(const json& node, PlantTopology& topo) {
  Section plant(node, "plant",
                {"tanks", "valves", "pump", "leak_coefficient", "degradation_efficiency"});
  if (plant.has("tanks")) {
    const json& tanks = plant.at("tanks");
    if (!tanks.is_object()) throw ConfigError("plant.tanks", "expected an object");
    for (const auto& [id, spec] : tanks.items()) {
      const std::string path = "plant.tanks." + id;
      auto it = std::find_if(topo.tanks.begin(), topo.tanks.end(), [&](auto& t) { return t.id == id; });
      if (it == topo.tanks.end()) throw ConfigError(path, "unknown tank");
      TankSpec& t = *it;
      Section s(spec, path, {"area", "h_max", "level_high_threshold", "level_low_threshold"});
      s.number("area", t.area);
      s.number("h_max", t.h_max);
      s.number("level_high_threshold", t.level_high_threshold);
      s.number("level_low_threshold", t.level_low_threshold);
      require_positive(t.area, s.path("area"));
      require_positive(t.h_max, s.path("h_max"));
      if (!(t.level_low_threshold > 0.0 && t.level_low_threshold < t.level_high_threshold &&
            t.level_high_threshold < t.h_max)) {
        throw ConfigError(path, "thresholds must satisfy 0 < low < high < h_max");
      }
    }
  }
  if (plant.has("valves")) {
    const json& valves = plant.at("valves");
    if (!valves.is_object()) throw ConfigError("plant.valves", "expected an object");
    for (const auto& [id, spec] : valves.items()) {
      const std::string path = "plant.valves." + id;
      auto it = std::find_if(topo.valves.begin(), topo.valves.end(), [&](auto& v) { return v.id == id; });
      if (it == topo.valves.end()) throw ConfigError(path, "unknown valve");
      ValveSpec& v = *it;
      Section s(spec, path, {"conductance"});
      s.number("conductance", v.conductance);
      require_positive(v.conductance, s.path("conductance"));
    }
  }
  if (plant.has("pump")) {
    Section s(plant.at("pump"), "plant.pump", {"q_max"});
    s.number("q_max", topo.pump.q_max);
    require_positive(topo.pump.q_max, s.path("q_max"));
  }
  plant.number("leak_coefficient", topo.leak_coefficient);
  if (!(topo.leak_coefficient >= 0.0)) {
    throw ConfigError("plant.leak_coefficient", "must be >= 0");
  }
  plant.number("degradation_efficiency", topo.degradation_efficiency);
  if (!(topo.degradation_efficiency >= 0.0 && topo.degradation_efficiency <= 1.0)) {
    throw ConfigError("plant.degradation_efficiency", "must lie in [0, 1]");
  }
}

FaultConfig read_fault(const json& node, const std::string& path, const PlantTopology& topo) {
  Section s(node, path, {"kind", "severity", "location", "onset_time"});
  std::string kind_name;
  s.string("kind", kind_name);
  const auto kind = fault_kind_from_string(kind_name);
  if (!kind) {
    throw ConfigError(s.path("kind"),
                      fmt::format("expected clogging, leakage or pump_degradation, got '{}'", kind_name));
  }
  FaultConfig f;
  f.kind = *kind;
  f.location = default_fault_location(*kind);
  s.number("severity", f.severity);
  s.string("location", f.location);
  s.number("onset_time", f.onset_time);
  try {
    validate_fault(f, topo);
  } catch (const PlantError& e) {
    throw ConfigError(path, e.what());
  }
  return f;
}

void read_scenario(const json& node, Scenario& scenario) {
  Section s(node, "scenario", {"name", "initial", "faults"});
  s.string("name", scenario.name);
  scenario.initial = initial_state(scenario.topology);
  if (s.has("initial")) {
    Section init(s.at("initial"), "scenario.initial", {"time", "levels", "open_valves", "pump_power"});
    init.number("time", scenario.initial.time);
    if (init.has("levels")) {
      const json& levels = init.at("levels");
      if (!levels.is_object()) throw ConfigError("scenario.initial.levels", "expected an object");
      for (const auto& [id, value] : levels.items()) {
        const std::string path = "scenario.initial.levels." + id;
        if (!scenario.topology.has_tank(id)) throw ConfigError(path, "unknown tank");
        if (!value.is_number()) throw ConfigError(path, "expected a number");
        const double level = value.get<double>();
        if (!(level >= 0.0 && level <= scenario.topology.tank(id).h_max)) {
          throw ConfigError(path, "level must lie in [0, h_max]");
        }
        scenario.initial.levels[id] = level;
      }
    }
    if (init.has("open_valves")) {
      const json& open = init.at("open_valves");
      if (!open.is_array()) throw ConfigError("scenario.initial.open_valves", "expected a list");
      for (const auto& v : open) {
        if (!v.is_string() || !scenario.topology.has_valve(v.get<std::string>())) {
          throw ConfigError("scenario.initial.open_valves", fmt::format("unknown valve {}", v.dump()));
        }
        scenario.initial.valve_open[v.get<std::string>()] = true;
      }
    }
    init.number("pump_power", scenario.initial.pump_power);
    if (!(scenario.initial.pump_power >= 0.0 && scenario.initial.pump_power <= 1.0)) {
      throw ConfigError("scenario.initial.pump_power", "must lie in [0, 1]");
    }
  }
  if (s.has("faults")) {
    const json& faults = s.at("faults");
    if (!faults.is_array()) throw ConfigError("scenario.faults", "expected a list");
    scenario.faults.clear();
    for (std::size_t i = 0; i < faults.size(); ++i) {
      scenario.faults.push_back(
          read_fault(faults[i], fmt::format("scenario.faults[{}]", i), scenario.topology));
    }
  }
}

void read_loop(const json& node, LoopConfig& loop) {
  Section s(node, "loop",
            {"max_itr", "max_steps", "dt", "target_level_B204", "symptom_threshold", "idle_interval",
             "max_decision_interval"});
  s.integer("max_itr", loop.max_itr);
  s.integer("max_steps", loop.max_steps);
  s.number("dt", loop.dt);
  s.number("target_level_B204", loop.target_level_B204);
  s.number("symptom_threshold", loop.symptom_threshold);
  s.number("idle_interval", loop.idle_interval);
  s.number("max_decision_interval", loop.max_decision_interval);
}

void read_validation(const json& node, RuleConfig& rules) {
  Section s(node, "validation", {"horizon", "no_progress", "cost_weights"});
  s.number("horizon", rules.horizon);
  s.boolean("no_progress", rules.no_progress);
  if (s.has("cost_weights")) {
    Section w(s.at("cost_weights"), "validation.cost_weights",
              {"overflow_margin", "pump_energy", "action_count"});
    w.number("overflow_margin", rules.cost_weights.overflow_margin);
    w.number("pump_energy", rules.cost_weights.pump_energy);
    w.number("action_count", rules.cost_weights.action_count);
  }
}

void read_backend(const json& node, BackendConfig& backend) {
  Section s(node, "backend",
            {"kind", "model", "strategy_model", "base_url", "timeout_s", "script", "fallback"});
  if (s.has("kind")) {
    std::string name;
    s.string("kind", name);
    const auto kind = backend_kind_from_string(name);
    if (!kind) throw ConfigError("backend.kind", fmt::format("expected oracle, scripted or llm, got '{}'", name));
    backend.kind = *kind;
  }
  const bool strategy_given = s.has("strategy_model");
  s.string("model", backend.remote.model);
  if (strategy_given) s.string("strategy_model", backend.remote.strategy_model);
  else backend.remote.strategy_model = backend.remote.model;
  s.string("base_url", backend.remote.base_url);
  s.number("timeout_s", backend.remote.timeout_s);
  require_positive(backend.remote.timeout_s, "backend.timeout_s");
  if (s.has("script")) {
    const json& script = s.at("script");
    if (!script.is_array()) throw ConfigError("backend.script", "expected a list of strings");
    backend.script.clear();
    for (const auto& line : script) {
      if (!line.is_string()) throw ConfigError("backend.script", "expected a list of strings");
      backend.script.push_back(line.get<std::string>());
    }
  }
  if (s.has("fallback")) {
    std::string fallback;
    s.string("fallback", fallback);
    if (fallback != "oracle" && fallback != "none") {
      throw ConfigError("backend.fallback", "expected oracle or none");
    }
    backend.script_fallback_oracle = fallback == "oracle";
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& file) {
  std::filesystem::path p(file);
  return p.is_absolute() ? p : base / p;
}

void read_prompt(const json& node, RunSetup& setup, const std::filesystem::path& base_dir) {
  Section s(node, "prompt", {"representation", "agents_file", "tasks_file"});
  if (s.has("representation")) {
    std::string name;
    s.string("representation", name);
    const auto repr = representation_from_string(name);
    if (!repr) {
      throw ConfigError("prompt.representation",
                        fmt::format("expected Text, SimCode or StateGraph, got '{}'", name));
    }
    setup.representation = *repr;
  }
  if (s.has("agents_file") != s.has("tasks_file")) {
    throw ConfigError("prompt", "agents_file and tasks_file must be given together");
  }
  if (s.has("agents_file")) {
    std::string agents, tasks;
    s.string("agents_file", agents);
    s.string("tasks_file", tasks);
    load_profiles(resolve(base_dir, agents), resolve(base_dir, tasks), setup.operator_profile,
                  setup.strategist_profile);
  }
}

void apply_overrides(json& doc, const ConfigOverrides& o) {
  if (!doc.is_object()) return;
  if (o.backend) doc["backend"]["kind"] = *o.backend;
  if (o.representation) doc["prompt"]["representation"] = *o.representation;
  if (o.fault_kind) {
    json fault = {{"kind", *o.fault_kind}};
    if (o.fault_severity) fault["severity"] = *o.fault_severity;
    if (o.fault_onset) fault["onset_time"] = *o.fault_onset;
    if (*o.fault_kind == "none") doc["scenario"]["faults"] = json::array();
    else doc["scenario"]["faults"] = json::array({fault});
  } else if (o.fault_severity || o.fault_onset) {
    auto& faults = doc["scenario"]["faults"];
    if (!faults.is_array() || faults.size() != 1) {
      throw ConfigError("scenario.faults", "severity or onset override needs exactly one fault");
    }
    if (o.fault_severity) faults[0]["severity"] = *o.fault_severity;
    if (o.fault_onset) faults[0]["onset_time"] = *o.fault_onset;
  }
}

std::vector<std::string> yaml_lines(const YAML::Node& node, const std::string& path) {
  if (!node) throw ConfigError(path, "missing");
  std::vector<std::string> out;
  if (node.IsScalar()) {
    out.push_back(node.as<std::string>());
  } else if (node.IsSequence()) {
    for (const auto& item : node) {
      if (!item.IsScalar()) throw ConfigError(path, "expected a list of strings");
      out.push_back(item.as<std::string>());
    }
  } else {
    throw ConfigError(path, "expected a string or a list of strings");
  }
  return out;
}

void check_yaml_keys(const YAML::Node& node, const std::string& path,
                     const std::set<std::string>& allowed) {
  if (!node || !node.IsMap()) throw ConfigError(path, "expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError(join_path(path, key), "unknown key");
  }
}

YAML::Node load_yaml(const std::filesystem::path& file, const std::string& path) {
  if (!std::filesystem::exists(file)) throw IoError(fmt::format("cannot read {}", file.string()));
  try {
    return YAML::LoadFile(file.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError(path, fmt::format("{}: {}", file.string(), e.what()));
  }
}

}  // namespace

void load_profiles(const std::filesystem::path& agents_file, const std::filesystem::path& tasks_file,
                   AgentProfile& operator_profile, AgentProfile& strategist_profile) {
  const YAML::Node agents = load_yaml(agents_file, "agents");
  const YAML::Node tasks = load_yaml(tasks_file, "tasks");
  check_yaml_keys(agents, "agents", {"plant_operator", "plant_strategist"});
  check_yaml_keys(tasks, "tasks", {"operate_plant", "refine_actions"});

  auto fill = [&](AgentProfile& p, const std::string& agent, const std::string& task) {
    const std::string apath = "agents." + agent;
    const std::string tpath = "tasks." + task;
    const YAML::Node a = agents[agent];
    const YAML::Node t = tasks[task];
    check_yaml_keys(a, apath, {"role", "goal", "skills"});
    check_yaml_keys(t, tpath, {"description", "expected_output"});
    try {
      p.role = a["role"] ? a["role"].as<std::string>() : throw ConfigError(apath + ".role", "missing");
      p.goal = a["goal"] ? a["goal"].as<std::string>() : throw ConfigError(apath + ".goal", "missing");
    } catch (const YAML::Exception& e) {
      throw ConfigError(apath, e.what());
    }
    p.skills = yaml_lines(a["skills"], apath + ".skills");
    p.task = yaml_lines(t["description"], tpath + ".description");
    p.expected_output = yaml_lines(t["expected_output"], tpath + ".expected_output");
  };
  AgentProfile op, strat;
  fill(op, "plant_operator", "operate_plant");
  fill(strat, "plant_strategist", "refine_actions");
  operator_profile = std::move(op);
  strategist_profile = std::move(strat);
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                              const ConfigOverrides& overrides) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", fmt::format("malformed configuration: {}", e.what()));
  }
  apply_overrides(doc, overrides);

  ExperimentConfig cfg;
  Section root(doc, "",
               {"scenario", "plant", "loop", "twin", "validation", "backend", "prompt", "expected_trace"});
  if (root.has("plant")) read_plant(root.at("plant"), cfg.scenario.topology);
  try {
    validate_topology(cfg.scenario.topology);
  } catch (const PlantError& e) {
    throw ConfigError("plant", e.what());
  }
  if (root.has("scenario")) read_scenario(root.at("scenario"), cfg.scenario);
  else cfg.scenario.initial = initial_state(cfg.scenario.topology);

  if (root.has("loop")) read_loop(root.at("loop"), cfg.setup.loop);
  validate_loop_config(cfg.setup.loop, cfg.scenario.topology);

  if (root.has("twin")) {
    Section twin(root.at("twin"), "twin", {"mode"});
    std::string mode;
    twin.string("mode", mode);
    if (twin.has("mode")) {
      const auto m = twin_mode_from_string(mode);
      if (!m) throw ConfigError("twin.mode", fmt::format("expected mirror or blind, got '{}'", mode));
      cfg.setup.twin_mode = *m;
    }
  }
  if (root.has("validation")) read_validation(root.at("validation"), cfg.setup.rules);
  try {
    horizon_steps(cfg.setup.rules.horizon, cfg.setup.loop.dt);
  } catch (const PlantError& e) {
    throw ConfigError("validation.horizon", e.what());
  }
  if (root.has("backend")) read_backend(root.at("backend"), cfg.backend);
  if (root.has("prompt")) read_prompt(root.at("prompt"), cfg.setup, base_dir);
  if (root.has("expected_trace")) {
    std::string trace;
    root.string("expected_trace", trace);
    cfg.expected_trace = resolve(base_dir, trace);
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read configuration {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path(), overrides);
}

std::unique_ptr<DecisionBackend> make_backend(const BackendConfig& config, const KnowledgeBase& kb) {
  switch (config.kind) {
    case BackendKind::Oracle:
      return std::make_unique<OracleBackend>(kb);
    case BackendKind::Scripted: {
      std::unique_ptr<DecisionBackend> fallback;
      if (config.script_fallback_oracle) fallback = std::make_unique<OracleBackend>(kb);
      return std::make_unique<ScriptedBackend>(config.script, kb.topology, std::move(fallback));
    }
    case BackendKind::Llm: {
      const char* key = std::getenv(kApiKeyVariable);
      if (key == nullptr || *key == '\0') {
        throw ConfigError("backend", fmt::format("environment variable {} is not set", kApiKeyVariable));
      }
      RemoteBackendConfig remote = config.remote;
      remote.api_key = key;
      return std::make_unique<RemoteBackend>(std::move(remote), kb.topology);
    }
  }
  throw ConfigError("backend.kind", "unsupported backend");
}

}  // namespace twinloop
