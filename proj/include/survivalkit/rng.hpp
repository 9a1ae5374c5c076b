#pragma once

#include <cstdint>
#include <random>

#include "survivalkit/core_math.hpp"

namespace survivalkit {

// Deterministic random source. Uniforms are built from the top 53 bits of a
// mt19937_64 draw so streams are identical across standard libraries;
// normals go through the inverse CDF for the same reason.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform on (0, 1), endpoints excluded.
  double uniform() {
    const std::uint64_t bits = gen_() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return normal_quantile(uniform()); }

  std::uint64_t next_u64() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

// Stable per-stream seed derivation (splitmix64 over seed ^ f(stream)).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace survivalkit
