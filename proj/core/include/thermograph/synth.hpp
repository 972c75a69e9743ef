#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "thermograph/graph.hpp"
#include "thermograph/ingest.hpp"

namespace thermograph {

/// Synthetic build job: a stepped pyramid (or prism at 90 degrees) whose
/// temperatures evolve by explicit diffusion on the unpruned layered graph
/// with edge weights alpha_true / rho^2.
struct SynthConfig {
  std::string material{"synthetic"};
  int width_px{12};
  int height_px{12};
  double pixel_pitch_mm{2.0};
  double layer_height_mm{2.0};
  int layers{20};
  int base_px{8};
  double wall_angle_deg{90.0};
  int frames_per_layer{6};
  double frame_rate_hz{3.0};
  int gap_intervals{2};
  int ref_substeps{8};
  double alpha_true{1.0};  // mm^2/s
  bool laser_enabled{true};
  double laser_I{60.0};     // K per reference substep at the spot centre
  double laser_eta{0.5};    // 1/mm
  int laser_stride_px{1};
  int path_offset{0};
  double base_K{500.0};
  double deposit_K{600.0};
  double powder_K{300.0};
  double ambient_K{300.0};
  double boundary_h{0.0};   // 1/s, on top and side vertices
  double noise_sigma{1.0};
  double threshold_K{kDefaultThresholdK};
  std::uint64_t seed{1};

  static SynthConfig from_json_file(const std::filesystem::path& path);
  /// Parses a JSON object; missing keys keep their defaults.
  static SynthConfig from_json_text(const std::string& text);
  std::string to_json() const;
};

struct GroundTruth {
  std::vector<LayeredGraph> graphs;           // reference graph per layer
  std::vector<std::vector<double>> states;    // full state per frame
  std::vector<int> graph_of_frame;
  /// Every reference substep's state sum within a layer, for conservation checks.
  std::vector<std::vector<double>> step_sums;
};

struct SynthResult {
  ThermalSequence sequence;
  GroundTruth truth;
};

/// Footprint pixels (col, row) of a layer.
std::vector<PixelIndex> layer_footprint(const SynthConfig& cfg, int layer);

/// Throws Error when the explicit reference step violates dt * max|L_ii| <= 1.
SynthResult generate_synthetic(const SynthConfig& cfg);

/// Graph-builder settings that reproduce the reference graphs without pruning.
GraphBuildParams reference_graph_params();

}  // namespace thermograph
