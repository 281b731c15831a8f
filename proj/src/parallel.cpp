#include "spinforge/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace spinforge::parallel {

void configure_from_env() {
#ifdef _OPENMP
  if (const char* env = std::getenv("SPINFORGE_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) omp_set_num_threads(n);
    } catch (const std::exception&) {
    }
  }
#endif
}

int thread_count() {
#ifdef _OPENMP
  configure_from_env();
  return omp_get_max_threads();
#else
  return 1;
#endif
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x5f3759dfu};
  return std::mt19937_64(seq);
}

}  // namespace spinforge::parallel
