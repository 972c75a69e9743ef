#include "thermograph/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "thermograph/numeric_text.hpp"

namespace thermograph {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::size_t> ThermalSequence::frames_of_layer(int layer) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].layer_index == layer) out.push_back(i);
  }
  return out;
}

int ThermalSequence::max_layer() const {
  int m = -1;
  for (const auto& f : frames) m = std::max(m, f.layer_index);
  return m;
}

void validate_frame(const ThermalFrame& frame, const std::string& origin) {
  if (frame.width == 0 || frame.height == 0) {
    throw FormatError(origin + ": empty frame");
  }
  if (frame.width * frame.height != frame.values.size()) {
    throw FormatError(origin + ": width*height does not match value count");
  }
  for (std::size_t i = 0; i < frame.values.size(); ++i) {
    const double v = frame.values[i];
    if (!std::isfinite(v)) {
      throw FormatError(origin + ":" + std::to_string(i / frame.width + 1) +
                        ": non-finite value");
    }
    if (v <= 0) {
      throw FormatError(origin + ":" + std::to_string(i / frame.width + 1) +
                        ": temperature must be > 0 K");
    }
  }
}

void validate_manifest(const SequenceManifest& m, const std::string& origin) {
  if (!(m.pixel_pitch_mm > 0)) throw FormatError(origin + ": pixel_pitch_mm must be > 0");
  if (!(m.layer_height_mm > 0)) throw FormatError(origin + ": layer_height_mm must be > 0");
  if (!(m.threshold_K > 0)) throw FormatError(origin + ": threshold_K must be > 0");
  if (!(m.frame_rate_hz > 0)) throw FormatError(origin + ": frame_rate_hz must be > 0");
  for (std::size_t i = 1; i < m.frames.size(); ++i) {
    if (!(m.frames[i].time_s > m.frames[i - 1].time_s)) {
      throw FormatError(origin + ": non-monotone timestamps at frame " + std::to_string(i) +
                        " ('" + m.frames[i].file + "')");
    }
    if (m.frames[i].layer_index < m.frames[i - 1].layer_index) {
      throw FormatError(origin + ": layer_index decreases at frame " + std::to_string(i));
    }
  }
  for (const auto& f : m.frames) {
    if (f.layer_index < 0) throw FormatError(origin + ": negative layer_index");
  }
}

SequenceManifest read_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw FormatError(manifest_path.string() + ": cannot open manifest");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  SequenceManifest m;
  try {
    m.pixel_pitch_mm = j.at("pixel_pitch_mm").get<double>();
    m.layer_height_mm = j.at("layer_height_mm").get<double>();
    m.threshold_K = j.value("threshold_K", kDefaultThresholdK);
    m.frame_rate_hz = j.value("frame_rate_hz", 3.0);
    for (const auto& f : j.at("frames")) {
      m.frames.push_back({f.at("file").get<std::string>(), f.at("time_s").get<double>(),
                          f.at("layer_index").get<int>()});
    }
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  validate_manifest(m, manifest_path.string());
  return m;
}

void write_manifest(const SequenceManifest& m, const fs::path& manifest_path) {
  // Written by hand so that every double uses the shortest round-trip form.
  std::ofstream out(manifest_path);
  if (!out) throw FormatError(manifest_path.string() + ": cannot write manifest");
  out << "{\n";
  out << "  \"pixel_pitch_mm\": " << format_double(m.pixel_pitch_mm) << ",\n";
  out << "  \"layer_height_mm\": " << format_double(m.layer_height_mm) << ",\n";
  out << "  \"threshold_K\": " << format_double(m.threshold_K) << ",\n";
  out << "  \"frame_rate_hz\": " << format_double(m.frame_rate_hz) << ",\n";
  out << "  \"frames\": [";
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    const auto& f = m.frames[i];
    out << (i ? ",\n    " : "\n    ");
    out << "{\"file\": " << json(f.file).dump() << ", \"time_s\": " << format_double(f.time_s)
        << ", \"layer_index\": " << f.layer_index << "}";
  }
  out << (m.frames.empty() ? "]\n" : "\n  ]\n");
  out << "}\n";
}

ThermalFrame read_frame(const fs::path& path, double time_s, int layer_index) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": missing frame file");
  ThermalFrame frame;
  frame.time_s = time_s;
  frame.layer_index = layer_index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tok;
    std::size_t cols = 0;
    while (ss >> tok) {
      double v = 0;
      try {
        v = parse_double(tok);
      } catch (const FormatError&) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) +
                          ": malformed grid row (bad token '" + tok + "')");
      }
      if (!std::isfinite(v)) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) +
                          ": non-finite value '" + tok + "'");
      }
      frame.values.push_back(v);
      ++cols;
    }
    if (cols == 0) continue;
    if (frame.width == 0) {
      frame.width = cols;
    } else if (cols != frame.width) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": malformed grid row (expected " + std::to_string(frame.width) +
                        " values, got " + std::to_string(cols) + ")");
    }
    ++frame.height;
  }
  validate_frame(frame, path.string());
  return frame;
}

void write_frame(const ThermalFrame& frame, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError(path.string() + ": cannot write frame");
  for (std::size_t r = 0; r < frame.height; ++r) {
    for (std::size_t c = 0; c < frame.width; ++c) {
      if (c) out << ' ';
      out << format_double(frame.at(r, c));
    }
    out << '\n';
  }
}

ThermalSequence load_sequence(const fs::path& manifest_path) {
  ThermalSequence seq;
  seq.manifest = read_manifest(manifest_path);
  const fs::path base = manifest_path.parent_path();
  seq.frames.reserve(seq.manifest.frames.size());
  for (const auto& entry : seq.manifest.frames) {
    seq.frames.push_back(read_frame(base / entry.file, entry.time_s, entry.layer_index));
  }
  return seq;
}

fs::path save_sequence(const ThermalSequence& seq, const fs::path& dir) {
  fs::create_directories(dir);
  SequenceManifest m = seq.manifest;
  m.frames.clear();
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const auto& f = seq.frames[i];
    std::string name;
    if (i < seq.manifest.frames.size() && !seq.manifest.frames[i].file.empty()) {
      name = seq.manifest.frames[i].file;
    } else {
      std::ostringstream ss;
      ss << "frame_" << std::setw(5) << std::setfill('0') << i << ".txt";
      name = ss.str();
    }
    write_frame(f, dir / name);
    m.frames.push_back({name, f.time_s, f.layer_index});
  }
  validate_manifest(m, (dir / "manifest.json").string());
  const fs::path manifest_path = dir / "manifest.json";
  write_manifest(m, manifest_path);
  return manifest_path;
}

fs::path resolve_manifest(const fs::path& p) {
  if (fs::is_directory(p)) return p / "manifest.json";
  return p;
}

double laser_flux(const LaserSource& source, Vec2 point_mm) {
  const double dx = point_mm.x - source.center.x;
  const double dy = point_mm.y - source.center.y;
  const double d = std::hypot(dx, dy);
  return source.intensity_I * std::exp(-d * source.decay_eta);
}

std::optional<Vec2> detect_laser(const ThermalFrame& frame, double threshold_K) {
  if (frame.values.empty()) return std::nullopt;
  const double vmax = *std::max_element(frame.values.begin(), frame.values.end());
  if (!(vmax > 1.5 * threshold_K)) return std::nullopt;

  const std::size_t n = frame.values.size();
  const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.001 * n)));
  std::vector<double> sorted = frame.values;
  std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end(), std::greater<>());
  const double cutoff = sorted[k - 1];

  double sx = 0, sy = 0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < frame.height; ++r) {
    for (std::size_t c = 0; c < frame.width; ++c) {
      if (frame.at(r, c) >= cutoff) {
        sx += static_cast<double>(c);
        sy += static_cast<double>(r);
        ++count;
      }
    }
  }
  return Vec2{sx / static_cast<double>(count), sy / static_cast<double>(count)};
}

}  // namespace thermograph
