#include "alphax/util.hpp"

#include <cstdio>
#include <sstream>

namespace alphax {

std::string format_double(double x) {
  char buf[64];
  // %.17g always round-trips; prefer the shorter %.15g when it does too.
  std::snprintf(buf, sizeof(buf), "%.15g", x);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  if (back != x) std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string rng_to_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng rng_from_string(const std::string& s) {
  Rng rng;
  std::istringstream is(s);
  is >> rng;
  return rng;
}

}  // namespace alphax
