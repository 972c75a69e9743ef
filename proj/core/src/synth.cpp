#include "thermograph/synth.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "thermograph/diffusion.hpp"
#include "thermograph/numeric_text.hpp"

namespace thermograph {

using nlohmann::json;

namespace {

using PosKey = std::tuple<double, double, double>;
PosKey key_of(const Vec3& p) { return {p.x, p.y, p.z}; }

void validate(const SynthConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(std::string("synth config: ") + what);
  };
  require(c.width_px > 0 && c.height_px > 0, "frame size must be positive");
  require(c.pixel_pitch_mm > 0 && c.layer_height_mm > 0, "pitch and layer height must be > 0");
  require(c.layers >= 1, "layers must be >= 1");
  require(c.base_px >= 2 && c.base_px <= std::min(c.width_px, c.height_px),
          "base_px must fit inside the frame");
  require(c.wall_angle_deg > 0 && c.wall_angle_deg <= 90, "wall_angle_deg must be in (0, 90]");
  require(c.frames_per_layer >= 1, "frames_per_layer must be >= 1");
  require(c.frame_rate_hz > 0, "frame_rate_hz must be > 0");
  require(c.gap_intervals >= 0, "gap_intervals must be >= 0");
  require(c.ref_substeps >= 1, "ref_substeps must be >= 1");
  require(c.alpha_true >= 0, "alpha_true must be >= 0");
  require(c.laser_I >= 0 && c.laser_eta >= 0, "laser parameters must be >= 0");
  require(c.laser_stride_px >= 1, "laser_stride_px must be >= 1");
  require(c.noise_sigma >= 0 && c.boundary_h >= 0, "noise_sigma and boundary_h must be >= 0");
  require(c.base_K > c.threshold_K && c.deposit_K > c.threshold_K,
          "part temperatures must exceed threshold_K");
  require(c.powder_K > 0 && c.powder_K < c.threshold_K, "powder_K must be in (0, threshold_K)");
}

std::vector<double> explicit_ref_step(const SparseLaplacian& L, const std::vector<double>& T,
                                      const std::vector<std::uint8_t>& boundary, double h,
                                      double ambient, double dt) {
  std::vector<double> out = L.multiply(T);
  for (std::size_t i = 0; i < T.size(); ++i) {
    out[i] = T[i] + dt * out[i];
    if (h > 0 && boundary[i]) out[i] -= dt * h * (T[i] - ambient);
  }
  return out;
}

}  // namespace

SynthConfig SynthConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("synth config: ") + e.what());
  }
  SynthConfig c;
  try {
#define TG_FIELD(name) c.name = j.value(#name, c.name)
    TG_FIELD(material);
    TG_FIELD(width_px);
    TG_FIELD(height_px);
    TG_FIELD(pixel_pitch_mm);
    TG_FIELD(layer_height_mm);
    TG_FIELD(layers);
    TG_FIELD(base_px);
    TG_FIELD(wall_angle_deg);
    TG_FIELD(frames_per_layer);
    TG_FIELD(frame_rate_hz);
    TG_FIELD(gap_intervals);
    TG_FIELD(ref_substeps);
    TG_FIELD(alpha_true);
    TG_FIELD(laser_enabled);
    TG_FIELD(laser_I);
    TG_FIELD(laser_eta);
    TG_FIELD(laser_stride_px);
    TG_FIELD(path_offset);
    TG_FIELD(base_K);
    TG_FIELD(deposit_K);
    TG_FIELD(powder_K);
    TG_FIELD(ambient_K);
    TG_FIELD(boundary_h);
    TG_FIELD(noise_sigma);
    TG_FIELD(threshold_K);
    TG_FIELD(seed);
#undef TG_FIELD
  } catch (const json::exception& e) {
    throw FormatError(std::string("synth config: ") + e.what());
  }
  return c;
}

SynthConfig SynthConfig::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open synth config");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string SynthConfig::to_json() const {
  std::ostringstream o;
  auto d = [](double v) { return format_double(v); };
  o << "{\n"
    << "  \"material\": " << json(material).dump() << ",\n"
    << "  \"width_px\": " << width_px << ",\n"
    << "  \"height_px\": " << height_px << ",\n"
    << "  \"pixel_pitch_mm\": " << d(pixel_pitch_mm) << ",\n"
    << "  \"layer_height_mm\": " << d(layer_height_mm) << ",\n"
    << "  \"layers\": " << layers << ",\n"
    << "  \"base_px\": " << base_px << ",\n"
    << "  \"wall_angle_deg\": " << d(wall_angle_deg) << ",\n"
    << "  \"frames_per_layer\": " << frames_per_layer << ",\n"
    << "  \"frame_rate_hz\": " << d(frame_rate_hz) << ",\n"
    << "  \"gap_intervals\": " << gap_intervals << ",\n"
    << "  \"ref_substeps\": " << ref_substeps << ",\n"
    << "  \"alpha_true\": " << d(alpha_true) << ",\n"
    << "  \"laser_enabled\": " << (laser_enabled ? "true" : "false") << ",\n"
    << "  \"laser_I\": " << d(laser_I) << ",\n"
    << "  \"laser_eta\": " << d(laser_eta) << ",\n"
    << "  \"laser_stride_px\": " << laser_stride_px << ",\n"
    << "  \"path_offset\": " << path_offset << ",\n"
    << "  \"base_K\": " << d(base_K) << ",\n"
    << "  \"deposit_K\": " << d(deposit_K) << ",\n"
    << "  \"powder_K\": " << d(powder_K) << ",\n"
    << "  \"ambient_K\": " << d(ambient_K) << ",\n"
    << "  \"boundary_h\": " << d(boundary_h) << ",\n"
    << "  \"noise_sigma\": " << d(noise_sigma) << ",\n"
    << "  \"threshold_K\": " << d(threshold_K) << ",\n"
    << "  \"seed\": " << seed << "\n"
    << "}\n";
  return o.str();
}

std::vector<PixelIndex> layer_footprint(const SynthConfig& cfg, int layer) {
  int inset = 0;
  if (cfg.wall_angle_deg < 90.0) {
    const double run_mm =
        layer * cfg.layer_height_mm / std::tan(cfg.wall_angle_deg * std::numbers::pi / 180.0);
    inset = static_cast<int>(std::floor(run_mm / cfg.pixel_pitch_mm + 1e-9));
  }
  inset = std::min(inset, (cfg.base_px - 2) / 2);
  const int c0 = (cfg.width_px - cfg.base_px) / 2 + inset;
  const int r0 = (cfg.height_px - cfg.base_px) / 2 + inset;
  const int side = cfg.base_px - 2 * inset;
  std::vector<PixelIndex> out;
  for (int r = r0; r < r0 + side; ++r) {
    for (int c = c0; c < c0 + side; ++c) out.push_back({c, r});
  }
  return out;
}

GraphBuildParams reference_graph_params() {
  GraphBuildParams p;
  p.prune_target = std::numeric_limits<std::size_t>::max();
  return p;
}

SynthResult generate_synthetic(const SynthConfig& cfg) {
  validate(cfg);
  const double interval = 1.0 / cfg.frame_rate_hz;
  const double dt = interval / cfg.ref_substeps;

  // Reference graphs from the exact footprints.
  std::vector<std::vector<Vec3>> layer_points(cfg.layers);
  for (int n = 0; n < cfg.layers; ++n) {
    for (const auto& px : layer_footprint(cfg, n)) {
      layer_points[n].push_back({px.col * cfg.pixel_pitch_mm, px.row * cfg.pixel_pitch_mm,
                                 n * cfg.layer_height_mm});
    }
  }
  SynthResult res;
  auto& truth = res.truth;
  const GraphBuildParams gp = reference_graph_params();
  truth.graphs.push_back(seed_layer(layer_points[0], 0));
  for (int n = 1; n < cfg.layers; ++n) {
    truth.graphs.push_back(accrete_layer(truth.graphs.back(), layer_points[n], gp));
  }

  std::vector<SparseLaplacian> laplacians;
  std::vector<std::vector<std::uint8_t>> boundary;
  for (const auto& g : truth.graphs) {
    std::vector<double> w;
    for (const auto& e : g.edges) w.push_back(cfg.alpha_true / (e.rho * e.rho));
    laplacians.push_back(assemble_laplacian(g, w));
    if (dt * laplacians.back().max_abs_diagonal() > 1.0) {
      throw Error("synth config: reference time step violates the explicit stability bound "
                  "(dt * max|L_ii| = " + std::to_string(dt * laplacians.back().max_abs_diagonal()) +
                  " > 1); increase ref_substeps");
    }
    std::vector<std::uint8_t> b(g.num_vertices(), 0);
    for (std::size_t i = 0; i < g.num_vertices(); ++i) {
      const auto c = g.vertices[i].cls;
      b[i] = (c == VertexClass::top || c == VertexClass::side || g.num_layers == 1) ? 1 : 0;
    }
    boundary.push_back(std::move(b));
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto& seq = res.sequence;
  seq.manifest.pixel_pitch_mm = cfg.pixel_pitch_mm;
  seq.manifest.layer_height_mm = cfg.layer_height_mm;
  seq.manifest.threshold_K = cfg.threshold_K;
  seq.manifest.frame_rate_hz = cfg.frame_rate_hz;

  long long tick = 0;
  std::vector<double> state;
  auto emit_frame = [&](int n) {
    const auto& g = truth.graphs[n];
    ThermalFrame f;
    f.width = static_cast<std::size_t>(cfg.width_px);
    f.height = static_cast<std::size_t>(cfg.height_px);
    f.time_s = static_cast<double>(tick) * interval;
    f.layer_index = n;
    f.values.assign(f.width * f.height, cfg.powder_K);
    for (std::size_t i = 0; i < g.num_vertices(); ++i) {
      if (g.vertices[i].layer != n) continue;
      const auto px = pixel_of(g.vertices[i].position, cfg.pixel_pitch_mm);
      f.at(static_cast<std::size_t>(px.row), static_cast<std::size_t>(px.col)) = state[i];
    }
    if (cfg.noise_sigma > 0) {
      for (auto& v : f.values) v += cfg.noise_sigma * noise(rng);
    }
    seq.frames.push_back(std::move(f));
    truth.states.push_back(state);
    truth.graph_of_frame.push_back(n);
  };

  for (int n = 0; n < cfg.layers; ++n) {
    const auto& g = truth.graphs[n];
    const auto& L = laplacians[n];
    // Carry the previous state over by position; new vertices start at deposit_K.
    std::vector<double> next(g.num_vertices(), n == 0 ? cfg.base_K : cfg.deposit_K);
    if (n > 0) {
      std::map<PosKey, double> prev;
      const auto& pg = truth.graphs[n - 1];
      for (std::size_t i = 0; i < pg.num_vertices(); ++i) prev[key_of(pg.vertices[i].position)] = state[i];
      for (std::size_t i = 0; i < g.num_vertices(); ++i) {
        auto it = prev.find(key_of(g.vertices[i].position));
        if (it != prev.end()) next[i] = it->second;
      }
    }
    state = std::move(next);

    std::vector<PixelIndex> path;
    const auto fp = layer_footprint(cfg, n);
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(fp.size()))));
    for (int r = 0; r < side; ++r) {
      for (int k = 0; k < side; ++k) {
        const int c = (r % 2 == 0) ? k : side - 1 - k;
        path.push_back(fp[static_cast<std::size_t>(r * side + c)]);
      }
    }
    const std::size_t start = static_cast<std::size_t>((n * 7 + cfg.path_offset) % static_cast<int>(path.size()));

    truth.step_sums.emplace_back();
    auto record_sum = [&] {
      double s = 0;
      for (double v : state) s += v;
      truth.step_sums.back().push_back(s);
    };
    record_sum();
    auto run_interval = [&](const PixelIndex* laser) {
      for (int s = 0; s < cfg.ref_substeps; ++s) {
        state = explicit_ref_step(L, state, boundary[n], cfg.boundary_h, cfg.ambient_K, dt);
        if (laser) {
          const double cx = laser->col * cfg.pixel_pitch_mm, cy = laser->row * cfg.pixel_pitch_mm;
          for (std::size_t i = 0; i < g.num_vertices(); ++i) {
            if (g.vertices[i].layer != n) continue;
            const double d = std::hypot(g.vertices[i].position.x - cx, g.vertices[i].position.y - cy);
            state[i] += cfg.laser_I * std::exp(-d * cfg.laser_eta);
          }
        }
        record_sum();
      }
      ++tick;
    };

    emit_frame(n);
    for (int k = 1; k < cfg.frames_per_layer; ++k) {
      const bool fire = cfg.laser_enabled && n > 0 && cfg.laser_I > 0;
      const PixelIndex& p =
          path[(start + static_cast<std::size_t>((k - 1) * cfg.laser_stride_px)) % path.size()];
      run_interval(fire ? &p : nullptr);
      emit_frame(n);
    }
    if (n + 1 < cfg.layers) {
      for (int k = 0; k <= cfg.gap_intervals; ++k) run_interval(nullptr);
    }
  }

  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    std::ostringstream name;
    name << "frame_" << std::setw(5) << std::setfill('0') << i << ".txt";
    seq.manifest.frames.push_back({name.str(), seq.frames[i].time_s, seq.frames[i].layer_index});
  }
  return res;
}

}  // namespace thermograph
