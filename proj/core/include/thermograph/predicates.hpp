#pragma once

#include "thermograph/common.hpp"

namespace thermograph::predicates {

/// Sign of det[b - a, c - a, d - a]: +1 when (a, b, c, d) is positively
/// oriented (right-handed), 0 when coplanar. Exact: a floating-point filter
/// falls back to rational arithmetic when the result is uncertain.
int orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

/// +1 when e lies strictly inside the sphere through a, b, c, d, -1 when
/// outside, 0 on it. Requires orient3d(a, b, c, d) > 0. Exact.
int insphere(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, const Vec3& e);

/// Number of times the exact fallback was taken (diagnostics only).
long exact_fallback_count();

}  // namespace thermograph::predicates
