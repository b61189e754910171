#pragma once

#include <cmath>
#include <cstdint>

namespace pggtrack {

// Deterministic splitmix64 stream. Distributions are implemented here rather
// than with <random> adapters so that generated values are stable across
// standard library implementations; every simulator output is keyed by
// (seed, stream, frame) to make regeneration order-independent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Derives an independent stream for a tagged sub-task.
  static Rng derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
    Rng mixer(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
    mixer.next();
    mixer.state_ ^= 0xbf58476d1ce4e5b9ULL * (index + 1);
    mixer.next();
    return mixer;
  }

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) { return n ? next() % n : 0; }

  // Standard normal via Box-Muller; one value per call, no caching, so a
  // stream stays reproducible regardless of interleaved uniform() calls.
  double gaussian() {
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

 private:
  std::uint64_t state_;
};

}  // namespace pggtrack
