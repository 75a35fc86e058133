#include "orrw/parallel.hpp"

#include <cstdlib>
#include <string>

namespace orrw {

unsigned resolve_threads(unsigned requested) {
  unsigned n = requested > 0 ? requested : std::max(1U, std::thread::hardware_concurrency());
  if (const char* cap = std::getenv("ORRW_THREADS")) {
    try {
      const long v = std::stol(cap);
      if (v > 0) n = std::min(n, static_cast<unsigned>(v));
    } catch (const std::exception&) {
      // Unparsable caps are ignored.
    }
  }
  return n;
}

}  // namespace orrw
