#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "thermograph/common.hpp"

namespace thermograph {

inline constexpr double kDefaultThresholdK = 423.15;

/// One thermal image of the build surface.
/// Values are absolute temperatures in Kelvin, row-major, width*height long.
struct ThermalFrame {
  std::size_t width{0};
  std::size_t height{0};
  double time_s{0};
  int layer_index{0};
  std::vector<double> values;

  double at(std::size_t row, std::size_t col) const { return values[row * width + col]; }
  double& at(std::size_t row, std::size_t col) { return values[row * width + col]; }
};

struct FrameEntry {
  std::string file;  // relative to the manifest directory
  double time_s{0};
  int layer_index{0};
};

struct SequenceManifest {
  double pixel_pitch_mm{1.0};
  double layer_height_mm{1.0};
  double threshold_K{kDefaultThresholdK};
  double frame_rate_hz{3.0};
  std::vector<FrameEntry> frames;
};

struct ThermalSequence {
  SequenceManifest manifest;
  std::vector<ThermalFrame> frames;

  /// Indices of the frames belonging to `layer`, in time order.
  std::vector<std::size_t> frames_of_layer(int layer) const;
  int max_layer() const;
};

/// Gaussian-type laser heat source: q = I * exp(-d * eta).
struct LaserSource {
  double intensity_I{0};  // Kelvin per step at the spot centre
  double decay_eta{0};    // per mm
  Vec2 center{};          // mm, in the current layer plane
};

/// Throws FormatError when a frame violates its invariants.
void validate_frame(const ThermalFrame& frame, const std::string& origin);

/// Validates manifest scalars and frame ordering (strictly increasing time,
/// non-decreasing layer index).
void validate_manifest(const SequenceManifest& manifest, const std::string& origin);

SequenceManifest read_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const SequenceManifest& manifest, const std::filesystem::path& manifest_path);

ThermalFrame read_frame(const std::filesystem::path& path, double time_s, int layer_index);
void write_frame(const ThermalFrame& frame, const std::filesystem::path& path);

/// Loads a manifest and every frame it references, validating everything.
ThermalSequence load_sequence(const std::filesystem::path& manifest_path);

/// Writes `manifest.json` plus one text grid per frame into `dir`.
/// Frame file names are taken from the manifest when present, otherwise
/// generated. Returns the manifest path.
std::filesystem::path save_sequence(const ThermalSequence& seq, const std::filesystem::path& dir);

/// Locates the manifest for a frames directory (accepts the file itself too).
std::filesystem::path resolve_manifest(const std::filesystem::path& frames_dir_or_manifest);

double laser_flux(const LaserSource& source, Vec2 point_mm);

/// Centroid (in pixel units: x = column, y = row) of the hottest 0.1% of
/// pixels, counting ties with the cut-off value, when the frame maximum
/// exceeds 1.5 * threshold_K.
std::optional<Vec2> detect_laser(const ThermalFrame& frame, double threshold_K);

}  // namespace thermograph
