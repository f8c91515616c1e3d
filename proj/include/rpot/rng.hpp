#ifndef RPOT_RNG_HPP
#define RPOT_RNG_HPP

#include <cstdint>
#include <random>

namespace rpot {

// Mixes a seed with a stream key into a fresh 64-bit seed (splitmix64 finalizer).
// Distinct keys give streams that are independent for practical purposes, and the
// derivation depends only on (seed, key) -- never on how much the parent stream
// has been consumed.  That property is what makes serial and multi-threaded runs
// of the study harness bitwise identical.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key);

// Random source used everywhere an operation takes an explicit rng argument.
// mt19937_64 supplies the raw bits; the uniform/normal transforms are written out
// here instead of using std::*_distribution so that draw sequences are pinned by
// this code alone (libstdc++ distributions keep hidden state and are free to
// change between releases).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Standard normal via Box-Muller (no cached spare; two uniforms per draw).
  double normal();

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double lognormal(double log_mean, double log_sd) {
    return std::exp(normal(log_mean, log_sd));
  }

  // Independent substream; key collisions are the caller's responsibility.
  Rng substream(std::uint64_t key) const { return Rng(derive_seed(seed_, key)); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace rpot

#endif
