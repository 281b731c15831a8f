#pragma once

#include <cstdint>
#include <random>

namespace spinforge::parallel {

// Serial paths are the references the OpenMP kernels are tested against.
enum class Exec { Parallel, Serial };

// Thread count honoring SPINFORGE_THREADS; 1 when OpenMP is unavailable.
int thread_count();
void configure_from_env();

// Independent stream for sample `index` of a run seeded with `seed`. The
// stream depends only on (seed, index), so serial and parallel loops agree.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index);

}  // namespace spinforge::parallel
