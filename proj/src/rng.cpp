#include "rpot/rng.hpp"

#include <cmath>
#include <numbers>

namespace rpot {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key) {
  // splitmix64 finalizer applied to seed xor golden-ratio-scrambled key.
  std::uint64_t z = seed ^ (key * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL);
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::normal() {
  // Box-Muller; u1 is nudged away from 0 so log() stays finite.
  double u1 = uniform();
  double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace rpot
