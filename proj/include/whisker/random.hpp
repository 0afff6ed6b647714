#pragma once

#include <cstdint>
#include <string_view>

#include "whisker/geometry.hpp"

namespace whisker {

/// Deterministic, platform-independent RNG (splitmix64 core, Box-Muller
/// normals). Standard-library distributions are avoided on purpose: their
/// output is implementation-defined and would break byte-identical reruns.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  Vec3 gaussian_vec3() { return Vec3(gaussian(), gaussian(), gaussian()); }

 private:
  uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

/// Deterministic per-module seed derivation (FNV-1a over the tag, mixed with
/// the scenario seed) so all randomness flows from a single root seed.
inline uint64_t derive_seed(uint64_t root, std::string_view tag) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return root ^ h;
}

}  // namespace whisker
