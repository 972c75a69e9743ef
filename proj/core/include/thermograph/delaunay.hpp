#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "thermograph/common.hpp"

namespace thermograph {

using Tetrahedron = std::array<int, 4>;
using Triangle = std::array<int, 3>;

/// Tetrahedral complex over a fixed vertex array.
///
/// `vertices` are the caller's positions. `perturbed` are the positions the
/// triangulation was actually computed on (input plus a seeded sub-micron
/// jitter that breaks cospherical lattice configurations); every tetrahedron
/// is positively oriented with respect to `perturbed`, and all metric
/// quantities of the complex (circumradius, volume) are evaluated there.
struct SimplicialComplex3 {
  std::vector<Vec3> vertices;
  std::vector<Vec3> perturbed;
  std::vector<Tetrahedron> tetrahedra;

  /// Undirected edges (i < j), sorted, without duplicates.
  std::vector<std::pair<int, int>> edges() const;
  /// Triangles (sorted vertex ids) incident to exactly one tetrahedron.
  std::vector<Triangle> boundary_faces() const;
  /// Flags for vertices referenced by at least one tetrahedron.
  std::vector<std::uint8_t> used_vertices() const;
};

struct DelaunayOptions {
  double jitter_mm = 1e-7;
  std::uint64_t seed = 0x6a09e667f3bcc909ULL;
};

/// 3D Delaunay tetrahedralization (incremental Bowyer-Watson with exact
/// predicates). Throws GeometryError("degenerate point set") for fewer than
/// four points, duplicate points or an all-coplanar input.
SimplicialComplex3 delaunay3(std::span<const Vec3> points, const DelaunayOptions& options = {});

inline constexpr double kAlphaInfinity = std::numeric_limits<double>::infinity();

/// Keeps exactly the tetrahedra whose circumradius is < alpha.
SimplicialComplex3 alpha_filter(const SimplicialComplex3& complex, double alpha);

double circumradius(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);
double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

/// Median length of the complex edges measured on the unperturbed vertices.
double median_edge_length(const SimplicialComplex3& complex);

}  // namespace thermograph
