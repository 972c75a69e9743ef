#include "thermograph/numeric_text.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "thermograph/common.hpp"

namespace thermograph {

std::string_view to_string(VertexClass c) {
  switch (c) {
    case VertexClass::bottom: return "bottom";
    case VertexClass::top: return "top";
    case VertexClass::side: return "side";
    case VertexClass::interior: return "interior";
  }
  return "interior";
}

VertexClass vertex_class_from_string(std::string_view s) {
  if (s == "bottom") return VertexClass::bottom;
  if (s == "top") return VertexClass::top;
  if (s == "side") return VertexClass::side;
  if (s == "interior") return VertexClass::interior;
  throw FormatError("unknown vertex class '" + std::string(s) + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw Error("format_double: to_chars failed");
  return std::string(buf, end);
}

double parse_double(std::string_view token) {
  if (token.empty()) throw FormatError("empty numeric token");
  std::string_view t = token;
  if (t.front() == '+') t.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec == std::errc::result_out_of_range) {
    throw FormatError("numeric token out of range: '" + std::string(token) + "'");
  }
  if (ec != std::errc{} || ptr != t.data() + t.size()) {
    throw FormatError("not a number: '" + std::string(token) + "'");
  }
  return v;
}

}  // namespace thermograph
