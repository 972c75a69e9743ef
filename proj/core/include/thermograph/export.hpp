#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "thermograph/trainer.hpp"

namespace thermograph {

/// A directory of predicted states: graph_LLL.txt per layer and
/// state_LLL_FFF.txt / obs_LLL_FFF.txt with `id temperature` lines.
struct StateRecord {
  int layer{0};
  int frame{0};
  double time_s{0};
  std::vector<double> values;
  std::vector<std::pair<int, double>> obs;  // observed vertices only
};

struct StateSet {
  std::vector<LayeredGraph> graphs;  // indexed by layer
  std::vector<StateRecord> states;
};

StateSet state_set_from_prediction(const Prediction& pred, const ThermalSequence& seq);
void write_state_set(const StateSet& set, const std::filesystem::path& dir);
StateSet read_state_set(const std::filesystem::path& dir);

void write_state_vector(const std::vector<double>& values, const std::filesystem::path& path,
                        const std::string& header);
std::vector<double> read_state_vector(const std::filesystem::path& path);

enum class ExportFormat { csv, vtk, json_plot };
ExportFormat export_format_from_string(std::string_view s);

/// Writes the exported files into `out_dir`; returns their paths.
std::vector<std::filesystem::path> export_states(const StateSet& set, ExportFormat format,
                                                 const std::filesystem::path& out_dir);

/// csv reader for round-trip checks: rows of (id, x, y, z, temperature).
struct CsvRow {
  int id{0};
  double x{0}, y{0}, z{0}, temperature{0};
};
std::vector<CsvRow> read_states_csv(const std::filesystem::path& path);

}  // namespace thermograph
