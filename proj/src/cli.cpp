#include "twinloop/cli.hpp"

#include <algorithm>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "twinloop/config.hpp"
#include "twinloop/csv_export.hpp"
#include "twinloop/error.hpp"
#include "twinloop/metrics.hpp"

#ifndef TWINLOOP_SCENARIO_DIR
#define TWINLOOP_SCENARIO_DIR "scenarios"
#endif

namespace twinloop {

std::filesystem::path default_scenario_dir() { return TWINLOOP_SCENARIO_DIR; }

namespace {

struct Options {
  std::string config;
  std::string scenario;
  std::string scenario_dir = default_scenario_dir().string();
  std::optional<std::string> backend;
  std::optional<std::string> repr;
  std::optional<std::string> fault_kind;
  std::optional<double> fault_severity;
  std::optional<double> fault_onset;
  std::string out_dir = "out";
  std::string trace;
  std::string logs;
  std::string write_trace;
  std::string profile = "operator";
};

ExperimentConfig load(const Options& o) {
  ConfigOverrides overrides{o.backend, o.repr, o.fault_kind, o.fault_severity, o.fault_onset};
  if (!o.config.empty() && !o.scenario.empty()) {
    throw ConfigError("", "--config and --scenario are mutually exclusive");
  }
  if (!o.config.empty()) return load_config(o.config, overrides);
  if (!o.scenario.empty()) {
    return load_config(std::filesystem::path(o.scenario_dir) / (o.scenario + ".json"), overrides);
  }
  return parse_config("{}", std::filesystem::current_path(), overrides);
}

std::string column_label(const DecisionBackend& backend, Representation repr) {
  return fmt::format("{} {}", backend.id(), to_string(repr));
}

ExpectedTrace expected_for(const ExperimentConfig& cfg, const KnowledgeBase& kb, const Options& o) {
  if (!o.trace.empty()) return load_trace(o.trace);
  if (cfg.expected_trace) return load_trace(*cfg.expected_trace);
  OracleBackend oracle(kb);
  return trace_from_records(run(cfg.setup, cfg.scenario, oracle).records);
}

int cmd_run(const Options& o, std::ostream& out) {
  const ExperimentConfig cfg = load(o);
  const KnowledgeBase kb = default_knowledge_base(cfg.scenario.topology, cfg.setup.loop.target_level_B204);
  auto backend = make_backend(cfg.backend, kb);
  const ExpectedTrace expected = expected_for(cfg, kb, o);

  const RunResult result = run(cfg.setup, cfg.scenario, *backend);
  export_csv(result, cfg.scenario.topology, o.out_dir);
  if (!o.write_trace.empty()) save_trace(trace_from_records(result.records), o.write_trace);
  const RunMetrics metrics = score(result.records, expected, cfg.scenario.topology);

  int forced = 0;
  for (const auto& r : result.records) forced += r.forced ? 1 : 0;
  out << fmt::format("scenario: {}\n", cfg.scenario.name.empty() ? "custom" : cfg.scenario.name);
  out << fmt::format("outcome: {}\n", to_string(result.outcome));
  out << fmt::format("simulated time: {:.1f} s\n", result.final_state.time);
  out << fmt::format("B204 level: {:.4f} m (target {:.4f} m)\n",
                     result.final_state.levels.at(std::string(kCollectorTank)),
                     cfg.setup.loop.target_level_B204);
  out << fmt::format("decision points: {}, forced executions: {}\n", result.decision_points, forced);
  out << '\n' << format_metrics_table(metrics, column_label(*backend, cfg.setup.representation));
  if (!metrics.identities_hold()) throw Error("metric identities violated");
  return result.outcome == Outcome::TargetReached ? kExitOk : kExitTimeout;
}

int cmd_score(const Options& o, std::ostream& out) {
  const ExperimentConfig cfg = load(o);
  const auto logs = read_decision_logs(std::filesystem::path(o.logs) / kAgentCsv);
  ExpectedTrace expected;
  if (!o.trace.empty()) {
    expected = load_trace(o.trace);
  } else {
    const KnowledgeBase kb = default_knowledge_base(cfg.scenario.topology, cfg.setup.loop.target_level_B204);
    expected = expected_for(cfg, kb, o);
  }
  const RunMetrics metrics = score_logs(logs, expected, cfg.scenario.topology);
  out << format_metrics_table(metrics, std::filesystem::path(o.logs).filename().string());
  return kExitOk;
}

int cmd_render(const Options& o, std::ostream& out) {
  const ExperimentConfig cfg = load(o);
  const KnowledgeBase kb = default_knowledge_base(cfg.scenario.topology, cfg.setup.loop.target_level_B204);
  const AgentProfile& profile =
      o.profile == "strategist" ? cfg.setup.strategist_profile : cfg.setup.operator_profile;
  const PromptBundle bundle = render(kb, cfg.scenario.initial, cfg.setup.representation, profile);
  out << bundle.rendered_text;
  if (!bundle.rendered_text.empty() && bundle.rendered_text.back() != '\n') out << '\n';
  out << fmt::format("\n# representation: {}, estimated tokens: {}\n",
                     to_string(bundle.representation), bundle.token_estimate);
  return kExitOk;
}

int cmd_list(const Options& o, std::ostream& out) {
  const std::filesystem::path dir(o.scenario_dir);
  if (!std::filesystem::is_directory(dir)) throw IoError(fmt::format("no scenario directory {}", dir.string()));
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const ExperimentConfig cfg = load_config(f);
    std::string faults;
    for (const auto& fault : cfg.scenario.faults) {
      if (!faults.empty()) faults += ", ";
      faults += fmt::format("{} {} at {} from t={}s", to_string(fault.kind), fault.severity,
                            fault.location, fault.onset_time);
    }
    out << fmt::format("{:<20} {}\n", f.stem().string(), faults.empty() ? "no faults" : faults);
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Closed-loop agent control of a simulated mixing plant", "twinloop"};
  app.require_subcommand(1);
  Options o;

  auto add_source = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Experiment configuration (JSON)");
    sub->add_option("--scenario", o.scenario, "Bundled scenario name (see list-scenarios)");
    sub->add_option("--scenario-dir", o.scenario_dir, "Directory of bundled scenarios");
  };
  auto add_repr = [&](CLI::App* sub) {
    sub->add_option("--repr", o.repr, "Plant representation: text, simcode or stategraph");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "Run one scenario, write CSV logs and print metrics");
  add_source(run_cmd);
  add_repr(run_cmd);
  run_cmd->add_option("--backend", o.backend, "Decision backend: oracle, scripted or llm");
  run_cmd->add_option("--fault-kind", o.fault_kind, "Replace faults: clogging, leakage, pump_degradation or none");
  run_cmd->add_option("--fault-severity", o.fault_severity, "Fault severity in [0, 1]");
  run_cmd->add_option("--fault-onset", o.fault_onset, "Fault onset time (s)");
  run_cmd->add_option("--out", o.out_dir, "Output directory for the CSV logs")->capture_default_str();
  run_cmd->add_option("--trace", o.trace, "Expected-action trace (JSON); default: oracle run");
  run_cmd->add_option("--write-trace", o.write_trace, "Save this run's executed actions as a trace");

  CLI::App* score_cmd = app.add_subcommand("score", "Re-score an existing log directory against a trace");
  add_source(score_cmd);
  score_cmd->add_option("--logs", o.logs, "Directory holding llm_plant_op.csv")->required();
  score_cmd->add_option("--trace", o.trace, "Expected-action trace (JSON); default: oracle run");

  CLI::App* render_cmd = app.add_subcommand("render-prompt", "Print the prompt for the initial plant state");
  add_source(render_cmd);
  add_repr(render_cmd);
  render_cmd->add_option("--profile", o.profile, "operator or strategist")
      ->check(CLI::IsMember({"operator", "strategist"}));

  CLI::App* list_cmd = app.add_subcommand("list-scenarios", "List bundled scenarios");
  list_cmd->add_option("--scenario-dir", o.scenario_dir, "Directory of bundled scenarios");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(o, out);
    if (score_cmd->parsed()) return cmd_score(o, out);
    if (render_cmd->parsed()) return cmd_render(o, out);
    return cmd_list(o, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitError;
}

}  // namespace twinloop
