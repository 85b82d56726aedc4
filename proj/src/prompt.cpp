#include "twinloop/prompt.hpp"

#include <fmt/format.h>

#include "plant_dynamics_source.inc"

namespace twinloop {

namespace {

constexpr std::string_view kRule =
    "------------------------------------------------------------------------";

std::string bullets(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += "- " + l + "\n";
  return out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i != 0) out += sep;
    out += items[i];
  }
  return out;
}

struct ValveGroups {
  std::vector<std::string> filling, outlet, transfer, drain;
};

ValveGroups group_valves(const PlantTopology& topo) {
  ValveGroups g;
  for (const auto& p : topo.pipes) {
    if (!p.valve_id) continue;
    if (p.pumped) g.transfer.push_back(*p.valve_id);
    else if (p.source == kSupplyNode) g.filling.push_back(*p.valve_id);
    else if (p.sink == kManifoldNode) g.outlet.push_back(*p.valve_id);
    else if (p.sink == kDrainNode) g.drain.push_back(*p.valve_id);
  }
  return g;
}

std::vector<std::string> sensor_ids(const PlantTopology& topo, SensorKind kind) {
  std::vector<std::string> ids;
  for (const auto& s : topo.sensors) {
    if (s.kind == kind) ids.push_back(s.id);
  }
  return ids;
}

std::string node_label(const std::string& node) { return node; }

std::string text_structure(const KnowledgeBase& kb) {
  const auto& topo = kb.topology;
  std::vector<std::string> tank_ids;
  for (const auto& t : topo.tanks) tank_ids.push_back(t.id);
  const ValveGroups g = group_valves(topo);

  std::string out;
  out += "- The system consists of four tanks: " + join(tank_ids) + "\n";
  out += "- There are eight valves controlling the liquid movement:\n";
  out += "    - Filling Valves: " + join(g.filling) + "\n";
  out += "    - Outlet Valves (feed tanks to pump manifold): " + join(g.outlet) + "\n";
  out += "    - Transfer Valve (pump manifold to B204): " + join(g.transfer) + "\n";
  out += "    - Drain Valve (B204 to product line): " + join(g.drain) + "\n";
  out += fmt::format("- Pump {} moves liquid from the manifold into B204; power 0.0 to 1.0 scales the flow.\n",
                     topo.pump.id);
  out += "- Sensors:\n";
  out += "    - Level switches: " + join(sensor_ids(topo, SensorKind::DiscreteHigh)) + ", " +
         join(sensor_ids(topo, SensorKind::DiscreteLow)) + "\n";
  out += "    - Pressure: " + join(sensor_ids(topo, SensorKind::Pressure)) + "\n";
  out += "    - Flow: " + join(sensor_ids(topo, SensorKind::VolumeFlow)) + "\n";
  return out;
}

std::string text_behavior(const KnowledgeBase& kb) {
  std::string out = fmt::format("- Control sequence (step 1 to {}):\n", kb.behavior_machine.steps.size());
  for (const auto& s : kb.behavior_machine.steps) {
    out += fmt::format("    {}. {}\n", s.index, s.description);
  }
  out += fmt::format("- Transfers run the pump at {:.1f}; flow below nominal hints at a fault.\n",
                     kNominalTransferPower);
  return out;
}

std::string graph_structure(const KnowledgeBase& kb) {
  const auto& topo = kb.topology;
  std::string out = "graph PID {\n  nodes:\n";
  for (const auto& t : topo.tanks) {
    out += fmt::format("    tank {} [area={} m2, h_max={} m, high={} m, low={} m]\n", t.id, t.area,
                       t.h_max, t.level_high_threshold, t.level_low_threshold);
  }
  out += fmt::format("    boundary {}\n    junction {}\n    boundary {}\n", kSupplyNode,
                     kManifoldNode, kDrainNode);
  for (const auto& v : topo.valves) {
    out += fmt::format("    valve {} [conductance={} m3/s]\n", v.id, v.conductance);
  }
  out += fmt::format("    pump {} [q_max={} m3/s]\n", topo.pump.id, topo.pump.q_max);
  for (const auto& s : topo.sensors) {
    const char* kind = "";
    switch (s.kind) {
      case SensorKind::DiscreteHigh: kind = "level_high"; break;
      case SensorKind::DiscreteLow: kind = "level_low"; break;
      case SensorKind::Pressure: kind = "pressure"; break;
      case SensorKind::VolumeFlow: kind = "volume_flow"; break;
    }
    out += fmt::format("    sensor {} [{}] measures {}\n", s.id, kind, s.target);
  }
  out += "  edges:\n";
  for (const auto& p : topo.pipes) {
    std::vector<std::string> attrs;
    if (p.valve_id) attrs.push_back("valve=" + *p.valve_id);
    if (p.pumped) attrs.push_back("pump=" + topo.pump.id);
    out += fmt::format("    {} -> {} via {} [{}]\n", node_label(p.source), node_label(p.sink), p.id,
                       join(attrs));
  }
  out += "}\n";
  return out;
}

std::string graph_behavior(const KnowledgeBase& kb) {
  const auto& steps = kb.behavior_machine.steps;
  std::string out = "state_machine sequence {\n  states:\n";
  out += "    S0 idle\n";
  for (const auto& s : steps) out += fmt::format("    S{} {}\n", s.index, s.name);
  out += "  transitions (from -> to | guard | entry actions of target):\n";
  std::string guard = "start";
  int from = 0;
  for (const auto& s : steps) {
    out += fmt::format("    S{} -> S{} | {} | {}\n", from, s.index, guard,
                       s.entry_actions.empty() ? "none" : join_actions(s.entry_actions));
    from = s.index;
    guard = s.exit_guard ? describe(*s.exit_guard) : "never";
  }
  out += "}\n";
  return out;
}

std::string code_literal(double v) { return fmt::format("{}", v); }

std::string code_structure(const KnowledgeBase& kb) {
  const auto& topo = kb.topology;
  std::string out = "```cpp\n// Scenario definition of the mixing module.\nPlantTopology make_topology() {\n";
  out += "  PlantTopology topo;\n";
  for (const auto& t : topo.tanks) {
    out += fmt::format("  topo.tanks.push_back(TankSpec{{\"{}\", {}, {}, {}, {}}});\n", t.id,
                       code_literal(t.area), code_literal(t.h_max),
                       code_literal(t.level_high_threshold), code_literal(t.level_low_threshold));
  }
  for (const auto& v : topo.valves) {
    out += fmt::format("  topo.valves.push_back(ValveSpec{{\"{}\", {}}});\n", v.id,
                       code_literal(v.conductance));
  }
  out += fmt::format("  topo.pump = PumpSpec{{\"{}\", {}}};\n", topo.pump.id, code_literal(topo.pump.q_max));
  for (const auto& p : topo.pipes) {
    out += fmt::format("  topo.pipes.push_back(PipeSpec{{\"{}\", \"{}\", \"{}\", {}, {}}});\n", p.id,
                       p.source, p.sink, p.valve_id ? "\"" + *p.valve_id + "\"" : "std::nullopt",
                       p.pumped ? "true" : "false");
  }
  for (const auto& s : topo.sensors) {
    const char* kind = "";
    switch (s.kind) {
      case SensorKind::DiscreteHigh: kind = "SensorKind::DiscreteHigh"; break;
      case SensorKind::DiscreteLow: kind = "SensorKind::DiscreteLow"; break;
      case SensorKind::Pressure: kind = "SensorKind::Pressure"; break;
      case SensorKind::VolumeFlow: kind = "SensorKind::VolumeFlow"; break;
    }
    out += fmt::format("  topo.sensors.push_back(SensorSpec{{\"{}\", {}, \"{}\"}});\n", s.id, kind,
                       s.target);
  }
  out += fmt::format("  topo.leak_coefficient = {};\n", code_literal(topo.leak_coefficient));
  out += fmt::format("  topo.degradation_efficiency = {};\n", code_literal(topo.degradation_efficiency));
  out += "  return topo;\n}\n```\n";
  return out;
}

std::string code_behavior(const KnowledgeBase& kb) {
  std::string out = "```cpp\n// Sequence controller.\nint next_step(int step, const SensorReadings& r, PlantState& s) {\n";
  out += "  switch (step) {\n";
  for (const auto& st : kb.behavior_machine.steps) {
    out += fmt::format("    case {}:  // {}\n", st.index, st.name);
    if (!st.exit_guard) {
      out += "      return step;\n";
      continue;
    }
    const Guard& g = *st.exit_guard;
    std::string cond;
    switch (g.kind) {
      case GuardKind::FlagTrue: cond = fmt::format("r.discrete_levels.at(\"{}\")", g.sensor); break;
      case GuardKind::AtLeast:
        cond = g.sensor == kFlowSensor ? fmt::format("r.volume_flow_rate >= {}", g.threshold)
                                       : fmt::format("r.pressures.at(\"{}\") >= {}", g.sensor, g.threshold);
        break;
      case GuardKind::AtMost:
        cond = g.sensor == kFlowSensor ? fmt::format("r.volume_flow_rate <= {}", g.threshold)
                                       : fmt::format("r.pressures.at(\"{}\") <= {}", g.sensor, g.threshold);
        break;
    }
    out += fmt::format("      if (!({})) return step;\n", cond);
    if (st.index < static_cast<int>(kb.behavior_machine.steps.size())) {
      for (const auto& a : kb.behavior_machine.at(st.index + 1).entry_actions) {
        switch (a.command) {
          case Command::Open: out += fmt::format("      s.valve_open[\"{}\"] = true;\n", a.actuator); break;
          case Command::Close: out += fmt::format("      s.valve_open[\"{}\"] = false;\n", a.actuator); break;
          case Command::SetPower: out += fmt::format("      s.pump_power = {};\n", a.power); break;
        }
      }
    }
    out += "      return step + 1;\n";
  }
  out += "  }\n  return step;\n}\n```\n";
  out += "Plant dynamics (integrator source):\n```cpp\n";
  out += kPlantDynamicsSource;
  out += "```\n";
  return out;
}

std::string fmt_flag(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string_view to_string(Representation repr) {
  switch (repr) {
    case Representation::Text: return "Text";
    case Representation::SimCode: return "SimCode";
    case Representation::StateGraph: return "StateGraph";
  }
  return "Text";
}

std::optional<Representation> representation_from_string(std::string_view name) {
  if (name == "Text" || name == "text") return Representation::Text;
  if (name == "SimCode" || name == "simcode" || name == "code") return Representation::SimCode;
  if (name == "StateGraph" || name == "stategraph" || name == "graph") return Representation::StateGraph;
  return std::nullopt;
}

AgentProfile default_operator_profile() {
  AgentProfile p;
  p.role = "Plant operator: keeps the mixing module of the process plant in safe operation.";
  p.goal =
      "Run the batch sequence within safety limits and issue corrective actions when the plant "
      "deviates from nominal behavior.";
  p.task = {"Sequentially fill and empty tanks B201 to B204.",
            "Compare the current plant state with the control sequence and decide the next actuator "
            "commands.",
            "If a sensor value deviates from what the sequence predicts, identify the likely fault and "
            "compensate it."};
  p.skills = {"Ensure safe plant operation.", "Never overfill a tank.",
              "Reason step by step about flows, levels and sensor thresholds."};
  p.expected_output = {
      "A short reasoning paragraph, then a line 'Actions:' followed by one command per line.",
      "Command grammar: <actuator_id> - open | close | set_power <fraction 0..1> (e.g., \"valve_in0 - close\").",
      "Write 'none' under 'Actions:' when no command is needed."};
  return p;
}

AgentProfile default_strategist_profile() {
  AgentProfile p = default_operator_profile();
  p.role = "Plant strategist: repairs rejected operator proposals for the mixing module.";
  p.goal = "Produce a corrected action list that passes validation in the digital twin.";
  p.task.push_back("Address every violation listed under [Validation Feedback].");
  return p;
}

std::size_t estimate_tokens(std::string_view text) {
  std::size_t chars = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++chars;
  }
  return (chars + 3) / 4;
}

std::string render_structure(const KnowledgeBase& kb, Representation repr) {
  switch (repr) {
    case Representation::Text: return text_structure(kb);
    case Representation::StateGraph: return graph_structure(kb);
    case Representation::SimCode: return code_structure(kb);
  }
  return {};
}

std::string render_behavior(const KnowledgeBase& kb, Representation repr) {
  switch (repr) {
    case Representation::Text: return text_behavior(kb);
    case Representation::StateGraph: return graph_behavior(kb);
    case Representation::SimCode: return code_behavior(kb);
  }
  return {};
}

std::string render_current_state(const KnowledgeBase& kb, const PlantState& state,
                                 const SymptomList& symptoms) {
  const auto& topo = kb.topology;
  const SensorReadings r = read_sensors(state, topo);
  std::string out;
  out += fmt::format("- time: {:.1f}s\n", state.time);
  for (const auto& t : topo.tanks) {
    out += fmt::format("- tank_{}_level: {:.3f}m\n", t.id, state.levels.at(t.id));
  }
  for (const auto& v : topo.valves) {
    out += fmt::format("- {}: {}\n", v.id, state.valve_open.at(v.id) ? "open" : "closed");
  }
  out += fmt::format("- {}_power: {:.3f}\n", topo.pump.id, state.pump_power);
  for (const auto& s : topo.sensors) {
    switch (s.kind) {
      case SensorKind::DiscreteHigh:
      case SensorKind::DiscreteLow:
        out += fmt::format("- {}: {}\n", s.id, fmt_flag(r.discrete_levels.at(s.id)));
        break;
      case SensorKind::Pressure:
        out += fmt::format("- {}: {:.1f}Pa\n", s.id, r.pressures.at(s.id));
        break;
      case SensorKind::VolumeFlow:
        out += fmt::format("- {}: {:.6f}m3/s\n", s.id, r.volume_flow_rate);
        break;
    }
  }
  if (symptoms.empty()) {
    out += "- detected_symptoms: none\n";
  } else {
    for (const auto& s : symptoms) {
      out += fmt::format(
          "- detected_symptom: {} (flow {:.6f}m3/s vs nominal {:.6f}m3/s, estimated severity {:.2f})\n",
          to_string(s.kind), s.measured_flow, s.expected_flow, s.severity_estimate);
    }
  }
  return out;
}

PromptBundle render(const KnowledgeBase& kb, const PlantState& state, Representation repr,
                    const AgentProfile& profile, const SymptomList& symptoms) {
  PromptBundle b;
  b.agent = profile;
  b.representation = repr;
  b.plant.function = "- " + kb.function_text + "\n";
  b.plant.structure = render_structure(kb, repr);
  b.plant.behavior = render_behavior(kb, repr);
  b.plant.current_state = render_current_state(kb, state, symptoms);

  std::string& t = b.rendered_text;
  t += kAgentDescriptionHeader;
  t += "\n\n[Role]\n" + profile.role + "\n\n[Goal]\n" + profile.goal + "\n\n[Task]\n" +
       bullets(profile.task) + "\n[Skills]\n" + bullets(profile.skills);
  t += kRule;
  t += "\n";
  t += kPlantDescriptionHeader;
  t += "\n\n[Plant Function]\n" + b.plant.function + "\n[Plant Structure]\n" + b.plant.structure +
       "\n[Plant Behavior]\n" + b.plant.behavior + "\n[Current Plant State]\n" +
       b.plant.current_state;
  t += kRule;
  t += "\n";
  t += kAgentActionHeader;
  t += "\n\n[Expected Output]\n" + bullets(profile.expected_output);
  b.token_estimate = estimate_tokens(t);
  return b;
}

PromptBundle with_feedback(const PromptBundle& bundle, const std::vector<std::string>& lines) {
  PromptBundle b = bundle;
  b.rendered_text += "\n";
  b.rendered_text += kFeedbackHeader;
  b.rendered_text += "\n" + bullets(lines);
  b.token_estimate = estimate_tokens(b.rendered_text);
  return b;
}

}  // namespace twinloop
