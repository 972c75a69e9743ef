#pragma once

#include <string>
#include <string_view>

namespace thermograph {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

/// Strict parse of a full token; throws FormatError on junk or overflow.
/// Accepts "nan"/"inf" spellings; callers validate finiteness themselves.
double parse_double(std::string_view token);

}  // namespace thermograph
