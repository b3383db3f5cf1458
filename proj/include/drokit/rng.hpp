#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace drokit {

/// Deterministic random source. All derived draws (unit doubles, normals,
/// bounded integers) are built from the raw mt19937_64 stream with fixed
/// arithmetic, so a seed reproduces the same sequence on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() {
    ++draws_;
    return eng_();
  }

  /// Uniform double in [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (two uniforms per draw, no caching).
  double next_normal() {
    double u1 = next_unit();
    double u2 = next_unit();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t next_below(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Number of raw draws consumed so far; serves as an opaque checkpoint.
  std::uint64_t draw_count() const { return draws_; }

 private:
  std::mt19937_64 eng_;
  std::uint64_t draws_ = 0;
};

/// Derives an independent child seed from a master seed and a fixed offset.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t offset) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (offset + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace drokit
