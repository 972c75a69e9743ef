#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "thermograph/common.hpp"
#include "thermograph/delaunay.hpp"
#include "thermograph/ingest.hpp"

namespace thermograph {

struct PointCloud3 {
  std::vector<Vec3> points;  // mm
  std::vector<int> layer_of;

  std::size_t size() const { return points.size(); }
  int max_layer() const;
};

struct GraphVertex {
  Vec3 position;
  VertexClass cls{VertexClass::interior};
  double sid{0};
  int layer{0};
};

/// Undirected edge stored once with i < j.
struct GraphEdge {
  int i{0};
  int j{0};
  double rho{0};  // mm
};

struct LayeredGraph {
  std::vector<GraphVertex> vertices;
  std::vector<GraphEdge> edges;
  int num_layers{0};  // highest layer index + 1

  std::size_t num_vertices() const { return vertices.size(); }
  int max_layer() const { return num_layers - 1; }
  /// Vertices of the highest layer: the ones the camera sees at this stage.
  std::vector<std::uint8_t> observed_mask() const;
  std::vector<int> vertices_of_class(VertexClass c) const;
  double median_edge_length() const;
  double median_sid() const;
};

struct GraphBuildParams {
  std::size_t prune_target = 400;
  int top_k = 5;
  std::optional<double> alpha;  // nullopt: alpha_factor x median Delaunay edge length
  double alpha_factor = 1.5;
  DelaunayOptions delaunay;
};

/// One point per pixel strictly above threshold_K, in mm.
std::vector<Vec3> threshold_frame(const ThermalFrame& frame, const SequenceManifest& manifest);

/// Closed-form scale-invariant density 3/(8 pi) * sum_{j != i} |v_i - v_j|^-2.
/// Throws GeometryError("coincident points") on a zero distance.
double scale_invariant_density(std::span<const Vec3> points, std::size_t i);
std::vector<double> scale_invariant_density(std::span<const Vec3> points);

/// Points of `cloud` that may be pruned: those in the top `top_k` layers.
std::vector<std::uint8_t> removable_mask(const PointCloud3& cloud, int top_k);

/// Indices removed by `prune`, in removal order.
std::vector<std::size_t> prune_order(const PointCloud3& cloud, std::size_t target_count, int top_k);

/// Removes the densest removable point (lowest index on ties) until exactly
/// `target_count` removable points remain. Relative order of survivors is kept.
PointCloud3 prune(const PointCloud3& cloud, std::size_t target_count, int top_k);

/// Class per complex vertex: lowest layer -> bottom, highest -> top, on a
/// boundary face -> side, otherwise interior. Vertices outside every
/// tetrahedron are classified by layer, or side.
std::vector<VertexClass> classify_vertices(const SimplicialComplex3& complex,
                                           std::span<const int> layer_of);

/// Initial point-only graph for the first layer (no edges).
LayeredGraph seed_layer(std::span<const Vec3> points, int layer);

/// Adds `layer_points` as a new top layer and rebuilds the top-k window.
LayeredGraph accrete_layer(const LayeredGraph& graph, std::span<const Vec3> layer_points,
                           const GraphBuildParams& params);

/// Part points of each layer: pixels above threshold in any frame of that layer.
std::vector<std::vector<Vec3>> layer_point_sets(const ThermalSequence& seq);

/// Graph after each layer; element n covers layers 0..n. Element 0 is the
/// point-only seed.
std::vector<LayeredGraph> build_graph_sequence(const ThermalSequence& seq,
                                               const GraphBuildParams& params);

/// Text format: header `vertices N edges E layers M`, then `id x y z class
/// sid layer` per vertex and `i j rho` per edge.
void write_graph(const LayeredGraph& graph, const std::filesystem::path& path);
LayeredGraph read_graph(const std::filesystem::path& path);

void write_graph_sequence(const std::vector<LayeredGraph>& graphs, const std::filesystem::path& dir);
std::vector<LayeredGraph> read_graph_sequence(const std::filesystem::path& dir);

/// Vertex id of a graph position on the pixel grid (col, row).
struct PixelIndex {
  int col{0};
  int row{0};
};
PixelIndex pixel_of(const Vec3& position, double pixel_pitch_mm);

}  // namespace thermograph
