#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "twinloop/control_loop.hpp"
#include "twinloop/metrics.hpp"

namespace twinloop {

inline constexpr const char* kPlantCsv = "plant_op.csv";
inline constexpr const char* kTwinCsv = "digital_twin_op.csv";
inline constexpr const char* kAgentCsv = "llm_plant_op.csv";

std::vector<std::string> plant_csv_header(const PlantTopology& topology);
std::vector<std::string> twin_csv_header(const PlantTopology& topology);
std::vector<std::string> agent_csv_header();

/// Writes plant_op.csv, digital_twin_op.csv and llm_plant_op.csv into
/// `out_dir` (created if missing). Throws IoError.
void export_csv(const RunResult& result, const PlantTopology& topology,
                const std::filesystem::path& out_dir);

using CsvRow = std::vector<std::string>;

/// RFC 4180 reader: quoted fields, doubled quotes, embedded newlines.
std::vector<CsvRow> read_csv(const std::filesystem::path& path);
std::string csv_field(const std::string& value);

/// Level series per tank from plant_op.csv, in row order.
std::map<std::string, std::vector<double>> read_level_series(const std::filesystem::path& path,
                                                             const PlantTopology& topology);

/// Decision logs reconstructed from llm_plant_op.csv, for re-scoring.
std::vector<DecisionLog> read_decision_logs(const std::filesystem::path& path);

}  // namespace twinloop
