#pragma once

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "thermograph/graph.hpp"

namespace tg_test {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("thermograph_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Connected random graph: a random spanning tree plus extra random edges.
/// Positions are random in a 10 mm cube; classes cycle through all four.
inline thermograph::LayeredGraph random_graph(std::size_t n, std::size_t extra_edges,
                                              std::mt19937_64& rng) {
  using namespace thermograph;
  LayeredGraph g;
  g.num_layers = 2;
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (std::size_t i = 0; i < n; ++i) {
    GraphVertex v;
    v.position = {u(rng), u(rng), u(rng)};
    v.cls = static_cast<VertexClass>(i % 4);
    v.layer = v.cls == VertexClass::top ? 1 : 0;
    v.sid = 0.5 + 0.1 * static_cast<double>(i % 7);
    g.vertices.push_back(v);
  }
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t i = 1; i < n; ++i) {
    const int j = static_cast<int>(std::uniform_int_distribution<std::size_t>(0, i - 1)(rng));
    pairs.emplace_back(j, static_cast<int>(i));
  }
  for (std::size_t k = 0; k < extra_edges; ++k) {
    int a = static_cast<int>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    int b = static_cast<int>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    pairs.emplace_back(a, b);
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  for (auto [a, b] : pairs) {
    g.edges.push_back({a, b, distance(g.vertices[a].position, g.vertices[b].position)});
  }
  return g;
}

/// nx x ny grid graph with unit spacing in the z = 0 plane, 4-neighbour edges.
inline thermograph::LayeredGraph grid_graph(int nx, int ny) {
  using namespace thermograph;
  LayeredGraph g;
  g.num_layers = 1;
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      GraphVertex v;
      v.position = {static_cast<double>(x), static_cast<double>(y), 0.0};
      v.cls = VertexClass::top;
      g.vertices.push_back(v);
    }
  }
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      const int id = y * nx + x;
      if (x + 1 < nx) g.edges.push_back({id, id + 1, 1.0});
      if (y + 1 < ny) g.edges.push_back({id, id + nx, 1.0});
    }
  }
  return g;
}

}  // namespace tg_test
