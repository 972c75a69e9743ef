#include "thermograph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>
#include <tuple>

namespace thermograph {

namespace {

constexpr double kSidConstant = 3.0 / (8.0 * std::numbers::pi);

// Pair terms 1/d^2 are accumulated as fixed-point integers so that downdating
// is exact and equal densities compare equal regardless of summation order.
constexpr double kSidScale = 1099511627776.0;  // 2^40
constexpr double kSidMaxTerm = 8.0e6;          // keeps a term below 2^63

__extension__ typedef __int128 Int128;

std::int64_t quantized_pair_term(const Vec3& a, const Vec3& b) {
  const Vec3 d = a - b;
  const double d2 = dot(d, d);
  if (d2 == 0) throw GeometryError("coincident points");
  const double inv = 1.0 / d2;
  if (inv > kSidMaxTerm) throw GeometryError("points too close for density evaluation");
  return std::llround(inv * kSidScale);
}

double sid_from_quantized(Int128 sum) {
  return kSidConstant * (static_cast<double>(sum) / kSidScale);
}

struct UnionFind {
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<int> parent;
};

double median_of(std::vector<double> v) {
  if (v.empty()) return 0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double upper = v[mid];
  return 0.5 * (upper + *std::max_element(v.begin(), v.begin() + mid));
}

bool position_less(const GraphVertex& a, const GraphVertex& b) {
  return std::tie(a.layer, a.position.y, a.position.x, a.position.z) <
         std::tie(b.layer, b.position.y, b.position.x, b.position.z);
}

}  // namespace

int PointCloud3::max_layer() const {
  return layer_of.empty() ? -1 : *std::max_element(layer_of.begin(), layer_of.end());
}

std::vector<std::uint8_t> LayeredGraph::observed_mask() const {
  std::vector<std::uint8_t> mask(vertices.size(), 0);
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    mask[i] = vertices[i].layer == max_layer() ? 1 : 0;
  }
  return mask;
}

std::vector<int> LayeredGraph::vertices_of_class(VertexClass c) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (vertices[i].cls == c) out.push_back(static_cast<int>(i));
  }
  return out;
}

double LayeredGraph::median_edge_length() const {
  std::vector<double> rho;
  rho.reserve(edges.size());
  for (const auto& e : edges) rho.push_back(e.rho);
  return median_of(std::move(rho));
}

double LayeredGraph::median_sid() const {
  std::vector<double> sid;
  sid.reserve(vertices.size());
  for (const auto& v : vertices) sid.push_back(v.sid);
  return median_of(std::move(sid));
}

std::vector<Vec3> threshold_frame(const ThermalFrame& frame, const SequenceManifest& manifest) {
  std::vector<Vec3> out;
  const double z = frame.layer_index * manifest.layer_height_mm;
  for (std::size_t r = 0; r < frame.height; ++r) {
    for (std::size_t c = 0; c < frame.width; ++c) {
      if (frame.at(r, c) > manifest.threshold_K) {
        out.push_back({static_cast<double>(c) * manifest.pixel_pitch_mm,
                       static_cast<double>(r) * manifest.pixel_pitch_mm, z});
      }
    }
  }
  return out;
}

double scale_invariant_density(std::span<const Vec3> points, std::size_t i) {
  double sum = 0;
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (j == i) continue;
    const Vec3 d = points[i] - points[j];
    const double d2 = dot(d, d);
    if (d2 == 0) throw GeometryError("coincident points");
    sum += 1.0 / d2;
  }
  return kSidConstant * sum;
}

std::vector<double> scale_invariant_density(std::span<const Vec3> points) {
  const std::size_t n = points.size();
  std::vector<Int128> acc(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::int64_t q = quantized_pair_term(points[i], points[j]);
      acc[i] += q;
      acc[j] += q;
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = sid_from_quantized(acc[i]);
  return out;
}

std::vector<std::uint8_t> removable_mask(const PointCloud3& cloud, int top_k) {
  const int top = cloud.max_layer();
  std::vector<std::uint8_t> mask(cloud.size(), 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    mask[i] = cloud.layer_of[i] > top - top_k ? 1 : 0;
  }
  return mask;
}

std::vector<std::size_t> prune_order(const PointCloud3& cloud, std::size_t target_count, int top_k) {
  if (cloud.layer_of.size() != cloud.points.size()) {
    throw Error("prune: layer_of and points differ in length");
  }
  const auto removable = removable_mask(cloud, top_k);
  const auto n_removable =
      static_cast<std::size_t>(std::count(removable.begin(), removable.end(), 1));
  if (target_count > n_removable) {
    throw Error("prune: target_count " + std::to_string(target_count) +
                " exceeds removable population " + std::to_string(n_removable));
  }
  const std::size_t n = cloud.size();
  std::vector<std::size_t> order;
  if (target_count == n_removable) return order;

  std::vector<Int128> acc(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::int64_t q = quantized_pair_term(cloud.points[i], cloud.points[j]);
      acc[i] += q;
      acc[j] += q;
    }
  }
  std::vector<std::uint8_t> alive(n, 1);
  std::size_t remaining = n_removable;
  while (remaining > target_count) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i] || !removable[i]) continue;
      if (best == n || acc[i] > acc[best]) best = i;
    }
    alive[best] = 0;
    order.push_back(best);
    --remaining;
    for (std::size_t j = 0; j < n; ++j) {
      if (alive[j]) acc[j] -= quantized_pair_term(cloud.points[best], cloud.points[j]);
    }
  }
  return order;
}

PointCloud3 prune(const PointCloud3& cloud, std::size_t target_count, int top_k) {
  const auto order = prune_order(cloud, target_count, top_k);
  std::vector<std::uint8_t> dropped(cloud.size(), 0);
  for (std::size_t i : order) dropped[i] = 1;
  PointCloud3 out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (dropped[i]) continue;
    out.points.push_back(cloud.points[i]);
    out.layer_of.push_back(cloud.layer_of[i]);
  }
  return out;
}

namespace {

// Squared distance from p to triangle abc (closest-point regions).
double point_triangle_dist2(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  auto d2of = [&](const Vec3& q) { const Vec3 d = p - q; return dot(d, d); };
  if (d1 <= 0 && d2 <= 0) return d2of(a);
  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0 && d4 <= d3) return d2of(b);
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return d2of(a + (d1 / (d1 - d3)) * ab);
  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0 && d5 <= d6) return d2of(c);
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return d2of(a + (d2 / (d2 - d6)) * ac);
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    return d2of(b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b));
  }
  const double denom = 1.0 / (va + vb + vc);
  return d2of(a + (vb * denom) * ab + (vc * denom) * ac);
}

}  // namespace

std::vector<VertexClass> classify_vertices(const SimplicialComplex3& complex,
                                           std::span<const int> layer_of) {
  const std::size_t n = complex.vertices.size();
  if (layer_of.size() != n) throw Error("classify_vertices: layer_of length mismatch");
  std::vector<VertexClass> cls(n, VertexClass::interior);
  if (n == 0) return cls;
  const auto used = complex.used_vertices();
  int lo = std::numeric_limits<int>::max(), hi = std::numeric_limits<int>::min();
  for (std::size_t i = 0; i < n; ++i) {
    if (complex.tetrahedra.empty() || used[i]) {
      lo = std::min(lo, layer_of[i]);
      hi = std::max(hi, layer_of[i]);
    }
  }
  std::vector<std::uint8_t> on_boundary(n, 0);
  const auto faces = complex.boundary_faces();
  for (const auto& f : faces) {
    for (int v : f) on_boundary[v] = 1;
  }
  // Jitter can sink a vertex on a flat wall just below the hull; catch those
  // by their unperturbed distance to the boundary surface.
  Vec3 lo_c = complex.vertices[0], hi_c = complex.vertices[0];
  for (const auto& v : complex.vertices) {
    lo_c = {std::min(lo_c.x, v.x), std::min(lo_c.y, v.y), std::min(lo_c.z, v.z)};
    hi_c = {std::max(hi_c.x, v.x), std::max(hi_c.y, v.y), std::max(hi_c.z, v.z)};
  }
  const Vec3 diag = hi_c - lo_c;
  const double tol = 1e-9 * std::sqrt(dot(diag, diag));
  const double tol2 = tol * tol;
  for (const auto& f : faces) {
    const Vec3& a = complex.vertices[f[0]];
    const Vec3& b = complex.vertices[f[1]];
    const Vec3& c = complex.vertices[f[2]];
    const Vec3 fmin{std::min({a.x, b.x, c.x}) - tol, std::min({a.y, b.y, c.y}) - tol,
                    std::min({a.z, b.z, c.z}) - tol};
    const Vec3 fmax{std::max({a.x, b.x, c.x}) + tol, std::max({a.y, b.y, c.y}) + tol,
                    std::max({a.z, b.z, c.z}) + tol};
    for (std::size_t i = 0; i < n; ++i) {
      if (on_boundary[i] || !used[i]) continue;
      const Vec3& p = complex.vertices[i];
      if (p.x < fmin.x || p.y < fmin.y || p.z < fmin.z || p.x > fmax.x || p.y > fmax.y ||
          p.z > fmax.z)
        continue;
      if (point_triangle_dist2(p, a, b, c) <= tol2) on_boundary[i] = 1;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (layer_of[i] == lo) {
      cls[i] = VertexClass::bottom;
    } else if (layer_of[i] == hi) {
      cls[i] = VertexClass::top;
    } else if (on_boundary[i] || !used[i]) {
      cls[i] = VertexClass::side;
    }
  }
  return cls;
}

LayeredGraph seed_layer(std::span<const Vec3> points, int layer) {
  LayeredGraph g;
  g.num_layers = layer + 1;
  const auto sid = scale_invariant_density(points);
  for (std::size_t i = 0; i < points.size(); ++i) {
    g.vertices.push_back({points[i], VertexClass::bottom, sid[i], layer});
  }
  std::sort(g.vertices.begin(), g.vertices.end(), position_less);
  return g;
}

LayeredGraph accrete_layer(const LayeredGraph& graph, std::span<const Vec3> layer_points,
                           const GraphBuildParams& params) {
  const int new_layer = graph.num_layers;
  PointCloud3 cloud;
  for (const auto& v : graph.vertices) {
    cloud.points.push_back(v.position);
    cloud.layer_of.push_back(v.layer);
  }
  for (const auto& p : layer_points) {
    cloud.points.push_back(p);
    cloud.layer_of.push_back(new_layer);
  }
  const auto removable = removable_mask(cloud, params.top_k);
  const auto n_removable =
      static_cast<std::size_t>(std::count(removable.begin(), removable.end(), 1));
  const PointCloud3 pruned = prune(cloud, std::min(params.prune_target, n_removable), params.top_k);

  const SimplicialComplex3 dt = delaunay3(pruned.points, params.delaunay);
  const double alpha =
      params.alpha ? *params.alpha : params.alpha_factor * median_edge_length(dt);
  SimplicialComplex3 ac = alpha_filter(dt, alpha);
  if (ac.tetrahedra.empty()) throw GeometryError("accrete_layer: alpha filter removed every tetrahedron");

  // Keep the largest connected component (lowest root on ties).
  const std::size_t n = pruned.size();
  UnionFind uf(n);
  for (const auto& t : ac.tetrahedra) {
    for (int k = 1; k < 4; ++k) uf.unite(t[0], t[k]);
  }
  const auto used = ac.used_vertices();
  std::vector<std::size_t> comp_size(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (used[i]) ++comp_size[uf.find(static_cast<int>(i))];
  }
  const auto best_root = static_cast<int>(
      std::max_element(comp_size.begin(), comp_size.end()) - comp_size.begin());
  std::erase_if(ac.tetrahedra, [&](const Tetrahedron& t) { return uf.find(t[0]) != best_root; });

  const auto cls = classify_vertices(ac, pruned.layer_of);
  const auto keep = ac.used_vertices();

  LayeredGraph out;
  out.num_layers = new_layer + 1;
  std::vector<int> old_index;
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    out.vertices.push_back({pruned.points[i], cls[i], 0.0, pruned.layer_of[i]});
    old_index.push_back(static_cast<int>(i));
  }
  std::vector<int> perm(out.vertices.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(),
            [&](int a, int b) { return position_less(out.vertices[a], out.vertices[b]); });
  std::vector<GraphVertex> sorted;
  std::vector<int> new_of_old(n, -1);
  for (std::size_t k = 0; k < perm.size(); ++k) {
    sorted.push_back(out.vertices[perm[k]]);
    new_of_old[old_index[perm[k]]] = static_cast<int>(k);
  }
  out.vertices = std::move(sorted);

  std::vector<Vec3> positions;
  for (const auto& v : out.vertices) positions.push_back(v.position);
  const auto sid = scale_invariant_density(positions);
  for (std::size_t i = 0; i < out.vertices.size(); ++i) out.vertices[i].sid = sid[i];

  for (const auto& [a, b] : ac.edges()) {
    int i = new_of_old[a], j = new_of_old[b];
    if (i > j) std::swap(i, j);
    out.edges.push_back({i, j, distance(positions[i], positions[j])});
  }
  std::sort(out.edges.begin(), out.edges.end(),
            [](const GraphEdge& x, const GraphEdge& y) { return std::tie(x.i, x.j) < std::tie(y.i, y.j); });
  return out;
}

std::vector<std::vector<Vec3>> layer_point_sets(const ThermalSequence& seq) {
  std::vector<std::vector<Vec3>> out;
  for (int layer = 0; layer <= seq.max_layer(); ++layer) {
    const auto idx = seq.frames_of_layer(layer);
    if (idx.empty()) {
      out.emplace_back();
      continue;
    }
    ThermalFrame proj = seq.frames[idx.front()];
    for (std::size_t f : idx) {
      const auto& fr = seq.frames[f];
      for (std::size_t k = 0; k < proj.values.size(); ++k) {
        proj.values[k] = std::max(proj.values[k], fr.values[k]);
      }
    }
    out.push_back(threshold_frame(proj, seq.manifest));
  }
  return out;
}

std::vector<LayeredGraph> build_graph_sequence(const ThermalSequence& seq,
                                               const GraphBuildParams& params) {
  const auto layers = layer_point_sets(seq);
  if (layers.empty()) throw GeometryError("build_graph_sequence: no layers");
  std::vector<LayeredGraph> graphs;
  graphs.push_back(seed_layer(layers[0], 0));
  for (std::size_t n = 1; n < layers.size(); ++n) {
    graphs.push_back(accrete_layer(graphs.back(), layers[n], params));
  }
  return graphs;
}

PixelIndex pixel_of(const Vec3& position, double pixel_pitch_mm) {
  return {static_cast<int>(std::lround(position.x / pixel_pitch_mm)),
          static_cast<int>(std::lround(position.y / pixel_pitch_mm))};
}

}  // namespace thermograph
