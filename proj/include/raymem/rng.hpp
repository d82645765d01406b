#pragma once

#include <cmath>
#include <cstdint>

namespace raymem {

/// SplitMix64: the standard 64-bit splittable generator (Steele et al.).
/// Chosen over <random> engines because its output is fixed by the
/// algorithm itself, so seeded golden values hold on every platform.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Derives an independent stream, e.g. one per subsystem.
  SplitMix64 split() { return SplitMix64(next() ^ 0x9e3779b97f4a7c15ull); }

  bool next_bool() { return (next() >> 63) != 0; }

  /// Uniform in [0, 1).
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next() % n; }

  /// Standard normal via Box-Muller (deterministic, no rejection loop).
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    const double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Stateless hash of (seed, key) built from the SplitMix64 mixer; used for
/// per-point descriptors that must not depend on generation order.
inline std::uint64_t mix_hash(std::uint64_t seed, std::uint64_t key) {
  SplitMix64 g(seed ^ (key * 0xd1342543de82ef95ull + 0x2545f4914f6cdd1dull));
  return g.next();
}

}  // namespace raymem
