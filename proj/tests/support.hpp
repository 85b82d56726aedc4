#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <random>
#include <stdexcept>
#include <sstream>
#include <string>

#include "twinloop/error.hpp"
#include "twinloop/plant.hpp"

namespace testsupport {

inline std::filesystem::path source_dir() { return TWINLOOP_SOURCE_DIR; }

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("twinloop_test_" + name + "_" +
                    std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Random actuator configuration and levels inside the valid ranges.
inline twinloop::PlantState random_state(const twinloop::PlantTopology& topo, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  twinloop::PlantState s = twinloop::initial_state(topo);
  for (const auto& t : topo.tanks) s.levels[t.id] = unit(rng) * t.h_max;
  for (const auto& v : topo.valves) s.valve_open[v.id] = unit(rng) < 0.5;
  s.pump_power = unit(rng) < 0.3 ? 0.0 : unit(rng);
  return s;
}

inline twinloop::ActionList random_actions(const twinloop::PlantTopology& topo, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  twinloop::ActionList actions;
  for (const auto& v : topo.valves) {
    const double r = unit(rng);
    if (r < 0.2) actions.push_back(twinloop::Action::open(v.id));
    else if (r < 0.4) actions.push_back(twinloop::Action::close(v.id));
  }
  if (unit(rng) < 0.5) actions.push_back(twinloop::Action::set_power(topo.pump.id, unit(rng)));
  std::shuffle(actions.begin(), actions.end(), rng);
  return actions;
}

}  // namespace testsupport

namespace testsupport {

template <typename F>
twinloop::PlantErrorCode plant_error_code(F&& f) {
  try {
    f();
  } catch (const twinloop::PlantError& e) {
    return e.code();
  }
  throw std::runtime_error("expected a PlantError");
}

}  // namespace testsupport
