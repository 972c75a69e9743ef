#include "thermograph/export.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "thermograph/eval.hpp"
#include "thermograph/numeric_text.hpp"

namespace thermograph {

namespace fs = std::filesystem;

namespace {

std::string indexed(const char* stem, int layer, int frame = -1) {
  char buf[64];
  if (frame < 0) {
    std::snprintf(buf, sizeof buf, "%s_%03d.txt", stem, layer);
  } else {
    std::snprintf(buf, sizeof buf, "%s_%03d_%03d.txt", stem, layer, frame);
  }
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw Error(p.string() + ": cannot open for writing");
  return out;
}

const LayeredGraph& graph_for(const StateSet& set, const StateRecord& s) {
  if (s.layer < 0 || static_cast<std::size_t>(s.layer) >= set.graphs.size()) {
    throw Error("state set: no graph for layer " + std::to_string(s.layer));
  }
  const LayeredGraph& g = set.graphs[s.layer];
  if (g.vertices.size() != s.values.size()) {
    throw Error("state set: state length does not match graph of layer " +
                std::to_string(s.layer));
  }
  return g;
}

}  // namespace

StateSet state_set_from_prediction(const Prediction& pred, const ThermalSequence& seq) {
  StateSet set;
  set.graphs = pred.graphs;
  for (const auto& lp : pred.layers) {
    const auto frames = seq.frames_of_layer(lp.layer);
    for (std::size_t f = 0; f < lp.states.size(); ++f) {
      StateRecord r;
      r.layer = lp.layer;
      r.frame = static_cast<int>(f);
      r.time_s = f < frames.size() ? seq.frames[frames[f]].time_s : 0.0;
      r.values = lp.states[f];
      for (std::size_t i = 0; i < lp.observed.size(); ++i) {
        if (lp.observed[i]) r.obs.emplace_back(static_cast<int>(i), lp.obs[f][i]);
      }
      set.states.push_back(std::move(r));
    }
  }
  return set;
}

void write_state_vector(const std::vector<double>& values, const fs::path& path,
                        const std::string& header) {
  auto out = open_out(path);
  out << "# " << header << '\n';
  for (std::size_t i = 0; i < values.size(); ++i) out << i << ' ' << format_double(values[i]) << '\n';
}

namespace {

std::vector<std::pair<int, double>> read_pairs(const fs::path& path, std::string* header) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open");
  std::vector<std::pair<int, double>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (header && header->empty()) *header = line.substr(line.find_first_not_of("# "));
      continue;
    }
    std::istringstream ls(line);
    std::string a, b, extra;
    if (!(ls >> a >> b) || (ls >> extra)) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 'id temperature'");
    }
    try {
      out.emplace_back(std::stoi(a), parse_double(b));
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  return out;
}

}  // namespace

std::vector<double> read_state_vector(const fs::path& path) {
  const auto pairs = read_pairs(path, nullptr);
  std::vector<double> v(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (pairs[k].first != static_cast<int>(k)) {
      throw FormatError(path.string() + ": ids must be consecutive from 0");
    }
    v[k] = pairs[k].second;
  }
  return v;
}

void write_state_set(const StateSet& set, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t l = 0; l < set.graphs.size(); ++l) {
    write_graph(set.graphs[l], dir / indexed("graph", static_cast<int>(l)));
  }
  for (const auto& s : set.states) {
    graph_for(set, s);
    write_state_vector(s.values, dir / indexed("state", s.layer, s.frame),
                       "time_s " + format_double(s.time_s));
    auto out = open_out(dir / indexed("obs", s.layer, s.frame));
    out << "# observed\n";
    for (const auto& [id, t] : s.obs) out << id << ' ' << format_double(t) << '\n';
  }
}

StateSet read_state_set(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError(dir.string() + ": not a directory");
  StateSet set;
  std::map<int, fs::path> graphs;
  std::map<std::pair<int, int>, fs::path> states;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    int a = 0, b = 0;
    char tail = 0;
    if (std::sscanf(name.c_str(), "graph_%d.tx%c", &a, &tail) == 2) graphs[a] = e.path();
    else if (std::sscanf(name.c_str(), "state_%d_%d.tx%c", &a, &b, &tail) == 3) states[{a, b}] = e.path();
  }
  if (graphs.empty()) throw FormatError(dir.string() + ": no graph files");
  int expect = 0;
  for (const auto& [l, p] : graphs) {
    if (l != expect++) throw FormatError(dir.string() + ": graph files must be numbered from 000");
    set.graphs.push_back(read_graph(p));
  }
  for (const auto& [key, p] : states) {
    StateRecord r;
    r.layer = key.first;
    r.frame = key.second;
    std::string header;
    const auto pairs = read_pairs(p, &header);
    r.values = read_state_vector(p);
    if (header.rfind("time_s ", 0) == 0) r.time_s = parse_double(header.substr(7));
    const fs::path obs = dir / indexed("obs", r.layer, r.frame);
    if (fs::exists(obs)) r.obs = read_pairs(obs, nullptr);
    graph_for(set, r);
    set.states.push_back(std::move(r));
  }
  return set;
}

ExportFormat export_format_from_string(std::string_view s) {
  if (s == "csv") return ExportFormat::csv;
  if (s == "vtk") return ExportFormat::vtk;
  if (s == "json-plot") return ExportFormat::json_plot;
  throw Error("unknown export format '" + std::string(s) + "'");
}

std::vector<fs::path> export_states(const StateSet& set, ExportFormat format, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  if (format == ExportFormat::json_plot) {
    const fs::path p = out_dir / "plot.json";
    auto out = open_out(p);
    out << "{\"series\": [\n";
    for (std::size_t k = 0; k < set.states.size(); ++k) {
      const auto& s = set.states[k];
      graph_for(set, s);
      double mx = s.values.empty() ? 0 : s.values[0], sum = 0;
      for (double v : s.values) {
        mx = std::max(mx, v);
        sum += v;
      }
      const double mean = s.values.empty() ? 0 : sum / static_cast<double>(s.values.size());
      std::string eps = "null";
      if (!s.obs.empty()) {
        std::vector<double> obs(s.values.size(), 0.0);
        std::vector<std::uint8_t> mask(s.values.size(), 0);
        for (const auto& [id, t] : s.obs) {
          obs.at(static_cast<std::size_t>(id)) = t;
          mask[static_cast<std::size_t>(id)] = 1;
        }
        try {
          eps = format_double(relative_error(s.values, obs, mask));
        } catch (const Error&) {
          eps = "null";
        }
      }
      out << "  {\"layer\": " << s.layer << ", \"frame\": " << s.frame
          << ", \"time\": " << format_double(s.time_s) << ", \"max_T\": " << format_double(mx)
          << ", \"mean_T\": " << format_double(mean) << ", \"eps_r\": " << eps << "}"
          << (k + 1 < set.states.size() ? ",\n" : "\n");
    }
    out << "]}\n";
    written.push_back(p);
    return written;
  }
  for (const auto& s : set.states) {
    const LayeredGraph& g = graph_for(set, s);
    char stem[64];
    std::snprintf(stem, sizeof stem, "state_%03d_%03d.%s", s.layer, s.frame,
                  format == ExportFormat::csv ? "csv" : "vtk");
    const fs::path p = out_dir / stem;
    auto out = open_out(p);
    if (format == ExportFormat::csv) {
      out << "id,x,y,z,temperature\n";
      for (std::size_t i = 0; i < g.vertices.size(); ++i) {
        const Vec3& x = g.vertices[i].position;
        out << i << ',' << format_double(x.x) << ',' << format_double(x.y) << ','
            << format_double(x.z) << ',' << format_double(s.values[i]) << '\n';
      }
    } else {
      const std::size_t n = g.vertices.size(), m = g.edges.size();
      out << "# vtk DataFile Version 3.0\nthermal state layer " << s.layer << " frame " << s.frame
          << "\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS " << n << " double\n";
      for (const auto& v : g.vertices) {
        out << format_double(v.position.x) << ' ' << format_double(v.position.y) << ' '
            << format_double(v.position.z) << '\n';
      }
      out << "CELLS " << n + m << ' ' << 2 * n + 3 * m << '\n';
      for (std::size_t i = 0; i < n; ++i) out << "1 " << i << '\n';
      for (const auto& e : g.edges) out << "2 " << e.i << ' ' << e.j << '\n';
      out << "CELL_TYPES " << n + m << '\n';
      for (std::size_t i = 0; i < n; ++i) out << "1\n";
      for (std::size_t k = 0; k < m; ++k) out << "3\n";
      out << "POINT_DATA " << n << "\nSCALARS temperature double 1\nLOOKUP_TABLE default\n";
      for (double v : s.values) out << format_double(v) << '\n';
    }
    written.push_back(p);
  }
  return written;
}

std::vector<CsvRow> read_states_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open");
  std::string line;
  if (!std::getline(in, line) || line != "id,x,y,z,temperature") {
    throw FormatError(path.string() + ": missing csv header");
  }
  std::vector<CsvRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 5 columns");
    }
    CsvRow r;
    r.id = std::stoi(cells[0]);
    r.x = parse_double(cells[1]);
    r.y = parse_double(cells[2]);
    r.z = parse_double(cells[3]);
    r.temperature = parse_double(cells[4]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace thermograph
