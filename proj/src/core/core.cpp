#include "o2o/core.hpp"

#include <charconv>
#include <cmath>

namespace o2o {

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace o2o
