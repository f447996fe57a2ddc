#include "sparseweak/parallel.hpp"

#include <cstdlib>
#include <string>

namespace sparseweak {

std::size_t threads_from_env() {
  const char* raw = std::getenv("SPARSEWEAK_THREADS");
  std::size_t n = 0;
  if (raw != nullptr && *raw != '\0') {
    try {
      n = static_cast<std::size_t>(std::stoul(raw));
    } catch (const std::exception&) {
      n = 0;
    }
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

std::size_t resolve_threads(std::size_t requested) {
  return requested == 0 ? threads_from_env() : requested;
}

}  // namespace sparseweak
