#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "thermograph/graph.hpp"
#include "thermograph/numeric_text.hpp"

namespace thermograph {

namespace fs = std::filesystem;

namespace {

struct LineReader {
  std::ifstream in;
  std::string origin;
  std::size_t line_no = 0;

  std::vector<std::string> next() {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      std::istringstream ss(line);
      std::vector<std::string> tok;
      for (std::string t; ss >> t;) tok.push_back(t);
      if (!tok.empty()) return tok;
    }
    fail("unexpected end of file");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(origin + ":" + std::to_string(line_no) + ": " + what);
  }

  double number(const std::string& tok) const {
    double v = 0;
    try {
      v = parse_double(tok);
    } catch (const FormatError& e) {
      fail(e.what());
    }
    if (!std::isfinite(v)) fail("non-finite value '" + tok + "'");
    return v;
  }

  long integer(const std::string& tok) const {
    std::size_t pos = 0;
    long v = 0;
    try {
      v = std::stol(tok, &pos);
    } catch (const std::exception&) {
      fail("expected an integer, got '" + tok + "'");
    }
    if (pos != tok.size()) fail("expected an integer, got '" + tok + "'");
    return v;
  }
};

}  // namespace

void write_graph(const LayeredGraph& g, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError(path.string() + ": cannot write graph");
  out << "vertices " << g.vertices.size() << " edges " << g.edges.size() << " layers "
      << g.num_layers << '\n';
  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    const auto& v = g.vertices[i];
    out << i << ' ' << format_double(v.position.x) << ' ' << format_double(v.position.y) << ' '
        << format_double(v.position.z) << ' ' << to_string(v.cls) << ' ' << format_double(v.sid)
        << ' ' << v.layer << '\n';
  }
  for (const auto& e : g.edges) {
    out << e.i << ' ' << e.j << ' ' << format_double(e.rho) << '\n';
  }
}

LayeredGraph read_graph(const fs::path& path) {
  LineReader r{std::ifstream(path), path.string()};
  if (!r.in) throw FormatError(path.string() + ": cannot open graph file");
  auto head = r.next();
  if (head.size() != 6 || head[0] != "vertices" || head[2] != "edges" || head[4] != "layers") {
    r.fail("bad header, expected 'vertices N edges E layers M'");
  }
  const long nv = r.integer(head[1]), ne = r.integer(head[3]), nl = r.integer(head[5]);
  if (nv < 0 || ne < 0 || nl < 0) r.fail("negative count in header");
  LayeredGraph g;
  g.num_layers = static_cast<int>(nl);
  g.vertices.resize(static_cast<std::size_t>(nv));
  for (long k = 0; k < nv; ++k) {
    auto t = r.next();
    if (t.size() != 7) r.fail("vertex line needs 7 fields");
    if (r.integer(t[0]) != k) r.fail("vertex ids must be consecutive from 0");
    auto& v = g.vertices[static_cast<std::size_t>(k)];
    v.position = {r.number(t[1]), r.number(t[2]), r.number(t[3])};
    try {
      v.cls = vertex_class_from_string(t[4]);
    } catch (const FormatError& e) {
      r.fail(e.what());
    }
    v.sid = r.number(t[5]);
    v.layer = static_cast<int>(r.integer(t[6]));
    if (v.layer < 0 || v.layer >= g.num_layers) r.fail("vertex layer out of range");
  }
  g.edges.resize(static_cast<std::size_t>(ne));
  for (long k = 0; k < ne; ++k) {
    auto t = r.next();
    if (t.size() != 3) r.fail("edge line needs 3 fields");
    auto& e = g.edges[static_cast<std::size_t>(k)];
    e.i = static_cast<int>(r.integer(t[0]));
    e.j = static_cast<int>(r.integer(t[1]));
    e.rho = r.number(t[2]);
    if (e.i < 0 || e.j >= nv || !(e.i < e.j)) r.fail("edge needs 0 <= i < j < N");
    if (!(e.rho > 0)) r.fail("edge length must be > 0");
  }
  return g;
}

void write_graph_sequence(const std::vector<LayeredGraph>& graphs, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t n = 0; n < graphs.size(); ++n) {
    std::ostringstream name;
    name << "graph_" << std::setw(3) << std::setfill('0') << n << ".txt";
    write_graph(graphs[n], dir / name.str());
  }
}

std::vector<LayeredGraph> read_graph_sequence(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("graph_", 0) == 0 && entry.path().extension() == ".txt") {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) throw FormatError(dir.string() + ": no graph_*.txt files");
  std::sort(files.begin(), files.end());
  std::vector<LayeredGraph> graphs;
  for (const auto& f : files) graphs.push_back(read_graph(f));
  for (std::size_t n = 0; n < graphs.size(); ++n) {
    if (graphs[n].num_layers != static_cast<int>(n) + 1) {
      throw FormatError(files[n].string() + ": expected " + std::to_string(n + 1) + " layers");
    }
  }
  return graphs;
}

}  // namespace thermograph
