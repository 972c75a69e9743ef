#include "thermograph/predicates.hpp"

#include <atomic>
#include <cmath>

#include <boost/multiprecision/cpp_int.hpp>

namespace thermograph::predicates {

namespace {

using Rational = boost::multiprecision::cpp_rational;

std::atomic<long> g_fallbacks{0};

template <typename T>
T det3(const T& a1, const T& a2, const T& a3, const T& b1, const T& b2, const T& b3,
       const T& c1, const T& c2, const T& c3) {
  return a1 * (b2 * c3 - b3 * c2) - a2 * (b1 * c3 - b3 * c1) + a3 * (b1 * c2 - b2 * c1);
}

template <typename T>
T orient_det(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const T ax(a.x), ay(a.y), az(a.z);
  const T bx = T(b.x) - ax, by = T(b.y) - ay, bz = T(b.z) - az;
  const T cx = T(c.x) - ax, cy = T(c.y) - ay, cz = T(c.z) - az;
  const T dx = T(d.x) - ax, dy = T(d.y) - ay, dz = T(d.z) - az;
  return det3(bx, by, bz, cx, cy, cz, dx, dy, dz);
}

// 4x4 lifted determinant with rows (p - e, |p - e|^2) for p in a, b, c, d.
template <typename T>
T insphere_det(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, const Vec3& e) {
  const T ex(e.x), ey(e.y), ez(e.z);
  const Vec3* pts[4] = {&a, &b, &c, &d};
  T m[4][4];
  for (int r = 0; r < 4; ++r) {
    const T x = T(pts[r]->x) - ex, y = T(pts[r]->y) - ey, z = T(pts[r]->z) - ez;
    m[r][0] = x;
    m[r][1] = y;
    m[r][2] = z;
    m[r][3] = x * x + y * y + z * z;
  }
  // Expansion along the last column.
  const T m0 = det3(m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2], m[3][0], m[3][1], m[3][2]);
  const T m1 = det3(m[0][0], m[0][1], m[0][2], m[2][0], m[2][1], m[2][2], m[3][0], m[3][1], m[3][2]);
  const T m2 = det3(m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[3][0], m[3][1], m[3][2]);
  const T m3 = det3(m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2]);
  return -m[0][3] * m0 + m[1][3] * m1 - m[2][3] * m2 + m[3][3] * m3;
}

template <typename T>
int sign_of(const T& v) {
  return v > 0 ? 1 : (v < 0 ? -1 : 0);
}

double orient_permanent(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const double bx = std::abs(b.x - a.x), by = std::abs(b.y - a.y), bz = std::abs(b.z - a.z);
  const double cx = std::abs(c.x - a.x), cy = std::abs(c.y - a.y), cz = std::abs(c.z - a.z);
  const double dx = std::abs(d.x - a.x), dy = std::abs(d.y - a.y), dz = std::abs(d.z - a.z);
  return bx * (cy * dz + cz * dy) + by * (cx * dz + cz * dx) + bz * (cx * dy + cy * dx);
}

double insphere_permanent(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d,
                          const Vec3& e) {
  const Vec3* pts[4] = {&a, &b, &c, &d};
  double m[4][4];
  for (int r = 0; r < 4; ++r) {
    const double x = std::abs(pts[r]->x - e.x), y = std::abs(pts[r]->y - e.y),
                 z = std::abs(pts[r]->z - e.z);
    m[r][0] = x;
    m[r][1] = y;
    m[r][2] = z;
    m[r][3] = x * x + y * y + z * z;
  }
  auto p3 = [&](int r0, int r1, int r2) {
    return m[r0][0] * (m[r1][1] * m[r2][2] + m[r1][2] * m[r2][1]) +
           m[r0][1] * (m[r1][0] * m[r2][2] + m[r1][2] * m[r2][0]) +
           m[r0][2] * (m[r1][0] * m[r2][1] + m[r1][1] * m[r2][0]);
  };
  return m[0][3] * p3(1, 2, 3) + m[1][3] * p3(0, 2, 3) + m[2][3] * p3(0, 1, 3) +
         m[3][3] * p3(0, 1, 2);
}

// Conservative relative error bounds for the double evaluations above,
// including rounding of the coordinate differences.
constexpr double kOrientErrBound = 1e-14;
constexpr double kInsphereErrBound = 1e-13;

}  // namespace

int orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const double det = orient_det<double>(a, b, c, d);
  const double bound = kOrientErrBound * orient_permanent(a, b, c, d);
  if (det > bound) return 1;
  if (det < -bound) return -1;
  g_fallbacks.fetch_add(1, std::memory_order_relaxed);
  return sign_of(orient_det<Rational>(a, b, c, d));
}

int insphere(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, const Vec3& e) {
  // The lifted determinant is negative for e inside when (a, b, c, d) is
  // right-handed; flip so that +1 means inside.
  const double det = insphere_det<double>(a, b, c, d, e);
  const double bound = kInsphereErrBound * insphere_permanent(a, b, c, d, e);
  if (det > bound) return -1;
  if (det < -bound) return 1;
  g_fallbacks.fetch_add(1, std::memory_order_relaxed);
  return -sign_of(insphere_det<Rational>(a, b, c, d, e));
}

long exact_fallback_count() { return g_fallbacks.load(); }

}  // namespace thermograph::predicates
