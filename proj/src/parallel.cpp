#include "neuromfg/parallel.hpp"

#include <cstdlib>
#include <string>

#include "neuromfg/errors.hpp"

namespace neuromfg {

std::size_t worker_count(std::optional<std::size_t> configured) {
  if (const char* env = std::getenv("NEUROMFG_THREADS"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0') {
      throw ConfigError(std::string("NEUROMFG_THREADS is not an integer: ") + env);
    }
    if (v > 0) return static_cast<std::size_t>(v);
  } else if (configured && *configured > 0) {
    return *configured;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

}  // namespace neuromfg
