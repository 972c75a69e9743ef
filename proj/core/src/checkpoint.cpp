#include "thermograph/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "thermograph/numeric_text.hpp"

namespace thermograph {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 8> kMagic{'P', 'I', 'G', 'R', 'A', 'N', 'D', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b;
  for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xffu);
  out.write(b.data(), 8);
}

std::uint64_t get_u64(std::istream& in, const std::string& origin) {
  std::array<unsigned char, 8> b;
  if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw FormatError(origin + ": truncated file");
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  return v;
}

void put_block(std::ostream& out, const std::vector<double>& values) {
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

std::vector<double> get_block(std::istream& in, std::size_t n, const std::string& origin) {
  std::vector<double> out(n);
  for (auto& v : out) v = std::bit_cast<double>(get_u64(in, origin));
  return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const fs::path& path) {
  if (c.material.empty() ||
      c.material.find_first_of(" \t\r\n") != std::string::npos) {
    throw Error("checkpoint material tag must be a non-empty word");
  }
  const auto& m = c.model;
  const auto w = c.weights.as_array();
  std::ostringstream meta;
  meta << "version " << c.version << '\n';
  meta << "material " << c.material << '\n';
  meta << "T_ref " << format_double(m.norm.T_ref) << '\n';
  meta << "rho_ref " << format_double(m.norm.rho_ref) << '\n';
  meta << "sid_ref " << format_double(m.norm.sid_ref) << '\n';
  meta << "c_scale " << format_double(m.norm.c_scale) << '\n';
  meta << "q_scale " << format_double(m.norm.q_scale) << '\n';
  meta << "laser_i_raw " << format_double(m.laser.i_raw) << '\n';
  meta << "laser_e_raw " << format_double(m.laser.e_raw) << '\n';
  meta << "scheme " << to_string(c.scheme) << '\n';
  meta << "substeps " << c.substeps << '\n';
  for (int t = 0; t < kNumLossTerms; ++t) {
    meta << "w_" << to_string(static_cast<LossTerm>(t)) << ' ' << format_double(w[t]) << '\n';
  }
  meta << "iterations " << c.iterations << '\n';
  meta << "seed " << c.seed << '\n';
  meta << "stages_completed " << c.stages_completed << '\n';
  meta << "phi_input_dim " << m.nets.phi.input_dim() << '\n';
  meta << "phi_hidden " << m.nets.phi.hidden_width() << '\n';
  meta << "phi_transform " << to_string(m.nets.phi.transform) << '\n';
  meta << "psi_input_dim " << m.nets.psi.input_dim() << '\n';
  meta << "psi_hidden " << m.nets.psi.hidden_width() << '\n';
  meta << "psi_transform " << to_string(m.nets.psi.transform) << '\n';
  const std::string text = meta.str();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path.string() + ": cannot write checkpoint");
  out.write(kMagic.data(), kMagic.size());
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_block(out, m.nets.phi.flatten());
  put_block(out, m.nets.psi.flatten());
  if (!out) throw FormatError(path.string() + ": write failed");
}

Checkpoint load_checkpoint(const fs::path& path) {
  const std::string origin = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(origin + ": cannot open checkpoint");
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), 8) || magic != kMagic) throw FormatError(origin + ": not a checkpoint");
  const std::uint64_t len = get_u64(in, origin);
  if (len > (1u << 20)) throw FormatError(origin + ": implausible metadata length");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) {
    throw FormatError(origin + ": truncated file");
  }

  std::map<std::string, std::string> kv;
  std::istringstream ss(text);
  for (std::string line; std::getline(ss, line);) {
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos) throw FormatError(origin + ": bad metadata line '" + line + "'");
    kv[line.substr(0, sp)] = line.substr(sp + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(origin + ": missing metadata key '" + key + "'");
    return it->second;
  };
  auto num = [&](const std::string& key) { return parse_double(get(key)); };
  auto integer = [&](const std::string& key) { return std::stoull(get(key)); };

  Checkpoint c;
  c.version = static_cast<std::uint32_t>(integer("version"));
  if (c.version != kCheckpointVersion) {
    throw FormatError(origin + ": unsupported checkpoint version " + std::to_string(c.version));
  }
  c.material = get("material");
  auto& m = c.model;
  m.norm.T_ref = num("T_ref");
  m.norm.rho_ref = num("rho_ref");
  m.norm.sid_ref = num("sid_ref");
  m.norm.c_scale = num("c_scale");
  m.norm.q_scale = num("q_scale");
  m.laser.i_raw = num("laser_i_raw");
  m.laser.e_raw = num("laser_e_raw");
  c.scheme = scheme_from_string(get("scheme"));
  c.substeps = static_cast<int>(integer("substeps"));
  TermArray w{};
  for (int t = 0; t < kNumLossTerms; ++t) {
    w[t] = num("w_" + std::string(to_string(static_cast<LossTerm>(t))));
  }
  c.weights = LossWeights::from_array(w);
  c.iterations = integer("iterations");
  c.seed = integer("seed");
  c.stages_completed = static_cast<int>(integer("stages_completed"));

  const auto phi_in = static_cast<int>(integer("phi_input_dim"));
  const auto phi_h = static_cast<int>(integer("phi_hidden"));
  const auto psi_in = static_cast<int>(integer("psi_input_dim"));
  const auto psi_h = static_cast<int>(integer("psi_hidden"));
  if (phi_in <= 0 || phi_h <= 0 || psi_in <= 0 || psi_h <= 0 || phi_h > 65536 || psi_h > 65536 ||
      phi_in > 4096 || psi_in > 4096) {
    throw FormatError(origin + ": invalid network dimensions");
  }
  m.nets.phi = MlpParams::zeros(phi_in, phi_h, output_transform_from_string(get("phi_transform")));
  m.nets.psi = MlpParams::zeros(psi_in, psi_h, output_transform_from_string(get("psi_transform")));
  m.nets.phi.unflatten(get_block(in, m.nets.phi.num_params(), origin));
  m.nets.psi.unflatten(get_block(in, m.nets.psi.num_params(), origin));
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(origin + ": trailing bytes after parameter blocks");
  }
  return c;
}

}  // namespace thermograph
