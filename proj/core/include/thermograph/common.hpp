#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace thermograph {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input files.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Geometric construction failed (degenerate input, coincident points).
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver did not reach its tolerance.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

struct Vec2 {
  double x{0};
  double y{0};
};

struct Vec3 {
  double x{0};
  double y{0};
  double z{0};

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline double distance(Vec3 a, Vec3 b) { return norm(a - b); }

/// Vertex classes in their fixed one-hot order.
enum class VertexClass : std::uint8_t { bottom = 0, top = 1, side = 2, interior = 3 };

inline constexpr int kNumVertexClasses = 4;

std::string_view to_string(VertexClass c);
VertexClass vertex_class_from_string(std::string_view s);

}  // namespace thermograph
