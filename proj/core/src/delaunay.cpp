#include "thermograph/delaunay.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>

#include "thermograph/predicates.hpp"

namespace thermograph {

namespace {

constexpr int kInfinite = -1;

struct Cell {
  std::array<int, 4> v;
  std::array<int, 4> n{-1, -1, -1, -1};
  bool alive = true;
};

std::uint64_t facet_key(int a, int b, int c) {
  // Vertex ids are shifted by one so that the infinite vertex maps to 0.
  std::array<std::uint64_t, 3> k{static_cast<std::uint64_t>(a + 1),
                                 static_cast<std::uint64_t>(b + 1),
                                 static_cast<std::uint64_t>(c + 1)};
  std::sort(k.begin(), k.end());
  return (k[0] << 42) | (k[1] << 21) | k[2];
}

std::uint64_t morton_key(const Vec3& p, const Vec3& lo, double inv_extent) {
  auto quant = [&](double v, double l) {
    double t = (v - l) * inv_extent;
    t = std::clamp(t, 0.0, 1.0);
    return static_cast<std::uint64_t>(t * ((1u << 21) - 1));
  };
  auto spread = [](std::uint64_t x) {
    x &= 0x1fffff;
    x = (x | x << 32) & 0x1f00000000ffffULL;
    x = (x | x << 16) & 0x1f0000ff0000ffULL;
    x = (x | x << 8) & 0x100f00f00f00f00fULL;
    x = (x | x << 4) & 0x10c30c30c30c30c3ULL;
    x = (x | x << 2) & 0x1249249249249249ULL;
    return x;
  };
  return spread(quant(p.x, lo.x)) | (spread(quant(p.y, lo.y)) << 1) |
         (spread(quant(p.z, lo.z)) << 2);
}

class Triangulator {
 public:
  explicit Triangulator(const std::vector<Vec3>& pts) : pts_(pts) {}

  void run() {
    const int n = static_cast<int>(pts_.size());
    if (n < 4) throw GeometryError("degenerate point set: fewer than 4 points");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Vec3 lo = pts_[0], hi = pts_[0];
    for (const auto& p : pts_) {
      lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
      hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    const double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z, 1e-300});
    std::vector<std::uint64_t> keys(n);
    for (int i = 0; i < n; ++i) keys[i] = morton_key(pts_[i], lo, 1.0 / extent);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return keys[a] < keys[b]; });

    const auto seed = initial_simplex(order);
    std::vector<char> inserted(n, 0);
    for (int s : seed) inserted[s] = 1;
    for (int idx : order) {
      if (!inserted[idx]) insert(idx);
    }
  }

  std::vector<Tetrahedron> finite_cells() const {
    std::vector<Tetrahedron> out;
    for (const auto& c : cells_) {
      if (!c.alive) continue;
      if (std::find(c.v.begin(), c.v.end(), kInfinite) != c.v.end()) continue;
      out.push_back(c.v);
    }
    return out;
  }

 void check_full_dimensional(const std::vector<int>& order) { pick_simplex(order); }

 private:
  std::array<int, 4> pick_simplex(const std::vector<int>& order) {
    const int n = static_cast<int>(order.size());
    int i0 = order[0], i1 = -1, i2 = -1, i3 = -1;
    for (int k = 1; k < n && i1 < 0; ++k) {
      if (!(pts_[order[k]] == pts_[i0])) i1 = order[k];
    }
    if (i1 < 0) throw GeometryError("degenerate point set: all points coincide");
    for (int k = 1; k < n && i2 < 0; ++k) {
      const int c = order[k];
      if (c == i1) continue;
      const Vec3 cr = cross(pts_[i1] - pts_[i0], pts_[c] - pts_[i0]);
      if (cr.x != 0 || cr.y != 0 || cr.z != 0) i2 = c;
    }
    if (i2 < 0) throw GeometryError("degenerate point set: all points collinear");
    int sign = 0;
    for (int k = 1; k < n && i3 < 0; ++k) {
      const int c = order[k];
      if (c == i1 || c == i2) continue;
      sign = predicates::orient3d(pts_[i0], pts_[i1], pts_[i2], pts_[c]);
      if (sign != 0) i3 = c;
    }
    if (i3 < 0) throw GeometryError("degenerate point set: all points coplanar");
    if (sign < 0) std::swap(i0, i1);
    return {i0, i1, i2, i3};
  }

  std::array<int, 4> initial_simplex(const std::vector<int>& order) {
    const std::array<int, 4> base = pick_simplex(order);
    std::vector<int> created;
    created.push_back(new_cell(base));
    for (int i = 0; i < 4; ++i) {
      std::array<int, 4> v = base;
      v[i] = kInfinite;
      // Swap two finite entries to flip orientation: the infinite vertex lies
      // on the opposite side of the facet from base[i].
      const int a = (i + 1) % 4, b = (i + 2) % 4;
      std::swap(v[a], v[b]);
      created.push_back(new_cell(v));
    }
    link(created);
    last_ = created[0];
    return base;
  }

  int new_cell(const std::array<int, 4>& v) {
    Cell c;
    c.v = v;
    if (!free_.empty()) {
      const int id = free_.back();
      free_.pop_back();
      cells_[id] = c;
      return id;
    }
    cells_.push_back(c);
    return static_cast<int>(cells_.size()) - 1;
  }

  // Pairs up facets among `ids` that share the same vertex triple.
  void link(const std::vector<int>& ids) {
    std::unordered_map<std::uint64_t, std::pair<int, int>> open;
    open.reserve(ids.size() * 4);
    for (int id : ids) {
      for (int j = 0; j < 4; ++j) {
        if (cells_[id].n[j] >= 0) continue;
        const auto& v = cells_[id].v;
        const std::uint64_t key = facet_key(v[(j + 1) % 4], v[(j + 2) % 4], v[(j + 3) % 4]);
        auto it = open.find(key);
        if (it == open.end()) {
          open.emplace(key, std::make_pair(id, j));
        } else {
          const auto [oid, oj] = it->second;
          cells_[id].n[j] = oid;
          cells_[oid].n[oj] = id;
          open.erase(it);
        }
      }
    }
    if (!open.empty()) throw GeometryError("delaunay3: inconsistent cavity (unmatched facets)");
  }

  bool is_infinite(const Cell& c) const {
    return c.v[0] == kInfinite || c.v[1] == kInfinite || c.v[2] == kInfinite ||
           c.v[3] == kInfinite;
  }

  const Vec3& P(int i, const Vec3& p) const { return i == kInfinite ? p : pts_[i]; }

  // Orientation of cell `c` with vertex slot `slot` replaced by p.
  int orient_replaced(const Cell& c, int slot, const Vec3& p) const {
    const Vec3* q[4];
    for (int k = 0; k < 4; ++k) q[k] = (k == slot) ? &p : &pts_[c.v[k]];
    return predicates::orient3d(*q[0], *q[1], *q[2], *q[3]);
  }

  bool in_conflict(int id, const Vec3& p) const {
    const Cell& c = cells_[id];
    int inf_slot = -1;
    for (int k = 0; k < 4; ++k) {
      if (c.v[k] == kInfinite) inf_slot = k;
    }
    if (inf_slot < 0) {
      return predicates::insphere(pts_[c.v[0]], pts_[c.v[1]], pts_[c.v[2]], pts_[c.v[3]], p) > 0;
    }
    const int o = orient_replaced(c, inf_slot, p);
    if (o > 0) return true;
    if (o < 0) return false;
    // p on the hull plane: conflict iff inside the facet's circumcircle,
    // i.e. inside the circumsphere of the finite neighbour.
    const Cell& f = cells_[c.n[inf_slot]];
    return predicates::insphere(pts_[f.v[0]], pts_[f.v[1]], pts_[f.v[2]], pts_[f.v[3]], p) > 0;
  }

  int locate(const Vec3& p) {
    int cur = last_;
    if (cur < 0 || !cells_[cur].alive) {
      cur = -1;
      for (int i = 0; i < static_cast<int>(cells_.size()); ++i) {
        if (cells_[i].alive && !is_infinite(cells_[i])) {
          cur = i;
          break;
        }
      }
    }
    const std::size_t max_steps = 4 * cells_.size() + 64;
    for (std::size_t step = 0; step < max_steps; ++step) {
      const Cell& c = cells_[cur];
      if (is_infinite(c)) return cur;
      bool moved = false;
      const int offset = static_cast<int>(rng_() & 3u);
      for (int t = 0; t < 4; ++t) {
        const int k = (t + offset) & 3;
        if (orient_replaced(c, k, p) < 0) {
          cur = c.n[k];
          moved = true;
          break;
        }
      }
      if (!moved) return cur;
    }
    throw GeometryError("delaunay3: point location did not terminate");
  }

  void insert(int idx) {
    const Vec3& p = pts_[idx];
    const int start = locate(p);
    const Cell& sc = cells_[start];
    for (int k = 0; k < 4; ++k) {
      if (sc.v[k] != kInfinite && pts_[sc.v[k]] == p) {
        throw GeometryError("degenerate point set: duplicate point");
      }
    }
    if (!in_conflict(start, p)) {
      throw GeometryError("degenerate point set: point on a circumsphere boundary");
    }

    // Cavity: connected set of cells whose circumsphere contains p.
    std::vector<int> cavity{start};
    std::vector<std::pair<int, int>> boundary;  // (cell, facet slot)
    mark_.resize(cells_.size(), 0);
    ++stamp_;
    mark_[start] = stamp_;
    for (std::size_t head = 0; head < cavity.size(); ++head) {
      const int id = cavity[head];
      for (int j = 0; j < 4; ++j) {
        const int nb = cells_[id].n[j];
        if (mark_[nb] == stamp_) continue;
        if (in_conflict(nb, p)) {
          mark_[nb] = stamp_;
          cavity.push_back(nb);
        } else {
          boundary.emplace_back(id, j);
        }
      }
    }

    std::vector<int> created;
    created.reserve(boundary.size());
    std::vector<std::pair<int, int>> outside;
    outside.reserve(boundary.size());
    for (const auto& [id, j] : boundary) {
      const int out_nb = cells_[id].n[j];
      int back_slot = -1;
      for (int k = 0; k < 4; ++k) {
        if (cells_[out_nb].n[k] == id) back_slot = k;
      }
      outside.emplace_back(out_nb, back_slot);
    }
    for (int id : cavity) {
      cells_[id].alive = false;
    }
    std::vector<std::array<int, 4>> new_vertices;
    new_vertices.reserve(boundary.size());
    for (const auto& [id, j] : boundary) {
      std::array<int, 4> v = cells_[id].v;
      v[j] = idx;
      new_vertices.push_back(v);
    }
    for (int id : cavity) free_.push_back(id);
    for (std::size_t b = 0; b < boundary.size(); ++b) {
      const int nc = new_cell(new_vertices[b]);
      const int j = boundary[b].second;
      cells_[nc].n[j] = outside[b].first;
      cells_[outside[b].first].n[outside[b].second] = nc;
      created.push_back(nc);
    }
    if (mark_.size() < cells_.size()) mark_.resize(cells_.size(), 0);
    for (int id : created) mark_[id] = 0;
    link(created);
    for (int id : created) {
      if (!is_infinite(cells_[id])) {
        last_ = id;
        break;
      }
    }
  }

  const std::vector<Vec3>& pts_;
  std::vector<Cell> cells_;
  std::vector<int> free_;
  std::vector<int> mark_;
  int stamp_ = 0;
  int last_ = -1;
  std::minstd_rand rng_{12345};
};

}  // namespace

std::vector<std::pair<int, int>> SimplicialComplex3::edges() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(tetrahedra.size() * 6);
  for (const auto& t : tetrahedra) {
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) {
        out.emplace_back(std::min(t[a], t[b]), std::max(t[a], t[b]));
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<Triangle> SimplicialComplex3::boundary_faces() const {
  std::map<Triangle, int> count;
  for (const auto& t : tetrahedra) {
    for (int skip = 0; skip < 4; ++skip) {
      Triangle f{};
      int k = 0;
      for (int a = 0; a < 4; ++a) {
        if (a != skip) f[k++] = t[a];
      }
      std::sort(f.begin(), f.end());
      ++count[f];
    }
  }
  std::vector<Triangle> out;
  for (const auto& [f, c] : count) {
    if (c == 1) out.push_back(f);
  }
  return out;
}

std::vector<std::uint8_t> SimplicialComplex3::used_vertices() const {
  std::vector<std::uint8_t> used(vertices.size(), 0);
  for (const auto& t : tetrahedra) {
    for (int v : t) used[v] = 1;
  }
  return used;
}

SimplicialComplex3 delaunay3(std::span<const Vec3> points, const DelaunayOptions& options) {
  SimplicialComplex3 out;
  out.vertices.assign(points.begin(), points.end());
  out.perturbed = out.vertices;
  if (points.size() < 4) throw GeometryError("degenerate point set: fewer than 4 points");
  {
    // Duplicates must be rejected before jitter would separate them.
    std::vector<Vec3> sorted = out.vertices;
    std::sort(sorted.begin(), sorted.end(), [](const Vec3& a, const Vec3& b) {
      return std::tie(a.x, a.y, a.z) < std::tie(b.x, b.y, b.z);
    });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      if (sorted[i] == sorted[i - 1]) throw GeometryError("degenerate point set: duplicate point");
    }
  }
  {
    // Coplanar or collinear input must be rejected before jitter lifts it.
    std::vector<int> order(out.vertices.size());
    std::iota(order.begin(), order.end(), 0);
    Triangulator probe(out.vertices);
    probe.check_full_dimensional(order);
  }
  if (options.jitter_mm > 0) {
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> u(-options.jitter_mm, options.jitter_mm);
    for (auto& p : out.perturbed) {
      p.x += u(rng);
      p.y += u(rng);
      p.z += u(rng);
    }
  }
  Triangulator tri(out.perturbed);
  tri.run();
  out.tetrahedra = tri.finite_cells();
  std::sort(out.tetrahedra.begin(), out.tetrahedra.end());
  return out;
}

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return dot(b - a, cross(c - a, d - a)) / 6.0;
}

double circumradius(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const Vec3 u = b - a, v = c - a, w = d - a;
  const double denom = 2.0 * dot(u, cross(v, w));
  if (denom == 0) return std::numeric_limits<double>::infinity();
  const Vec3 num = dot(u, u) * cross(v, w) + dot(v, v) * cross(w, u) + dot(w, w) * cross(u, v);
  return norm(num) / std::abs(denom);
}

SimplicialComplex3 alpha_filter(const SimplicialComplex3& complex, double alpha) {
  SimplicialComplex3 out;
  out.vertices = complex.vertices;
  out.perturbed = complex.perturbed;
  if (!(alpha > 0)) return out;
  for (const auto& t : complex.tetrahedra) {
    const auto& P = complex.perturbed;
    if (circumradius(P[t[0]], P[t[1]], P[t[2]], P[t[3]]) < alpha) out.tetrahedra.push_back(t);
  }
  return out;
}

double median_edge_length(const SimplicialComplex3& complex) {
  const auto e = complex.edges();
  if (e.empty()) return 0;
  std::vector<double> len;
  len.reserve(e.size());
  for (const auto& [i, j] : e) len.push_back(distance(complex.vertices[i], complex.vertices[j]));
  const std::size_t mid = len.size() / 2;
  std::nth_element(len.begin(), len.begin() + mid, len.end());
  if (len.size() % 2 == 1) return len[mid];
  const double upper = len[mid];
  const double lower = *std::max_element(len.begin(), len.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace thermograph
