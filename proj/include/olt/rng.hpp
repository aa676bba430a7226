#ifndef OLT_RNG_HPP
#define OLT_RNG_HPP

#include <cstdint>
#include <random>

#include "olt/types.hpp"

namespace olt::rng {

/// 53-bit uniform in (0, 1]. Drawn directly from the engine output so the
/// stream does not depend on library distribution internals.
inline double uniform01(std::mt19937_64& engine) {
  return (static_cast<double>(engine() >> 11) + 1.0) * 0x1p-53;
}

/// Circularly-symmetric complex normal with E|z|^2 = 1 (Box-Muller).
inline Complex complex_normal(std::mt19937_64& engine) {
  const double u1 = uniform01(engine);
  const double u2 = uniform01(engine);
  return std::polar(std::sqrt(-std::log(u1)), 2.0 * M_PI * u2);
}

/// splitmix64-based substream derivation for independent parallel streams.
inline uint64_t substream(uint64_t base, uint64_t index) {
  uint64_t z = base + 0x9E3779B97F4A7C15ull * (index + 1);
  for (int i = 0; i < 2; ++i) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
  }
  return z;
}

} // namespace olt::rng

#endif // OLT_RNG_HPP
