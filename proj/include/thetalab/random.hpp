#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "thetalab/types.hpp"

namespace thetalab {

// splitmix64 finalizer; used to derive independent stream seeds from
// (seed, stream) pairs so results never depend on scheduling.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Thin wrapper over mt19937_64 with a platform-independent double mapping
// (std::uniform_real_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t stream)
      : engine_(mix_seed(seed, stream)) {}

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  Complex complex_normal() { return {normal(), normal()}; }

  CVector complex_box(int n, double half_width) {
    CVector v(n);
    for (int i = 0; i < n; ++i)
      v[i] = {uniform(-half_width, half_width), uniform(-half_width, half_width)};
    return v;
  }

  CVector unit_complex(int n) {
    CVector v(n);
    for (int i = 0; i < n; ++i) v[i] = complex_normal();
    return v / v.norm();
  }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace thetalab
