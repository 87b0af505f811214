#ifndef DQR_RNG_HPP_
#define DQR_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace dqr {

//! SplitMix64 finalizer. Spreads the bits of a 64-bit value.
inline constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

//! Seed-splitting rule used by every randomized component.
//!
//! A root seed, a stream tag and a counter index map to one sub-seed, so
//! parallel work items (replications, oracle draws) get independent streams
//! without shared mutable state. Stream tags in use: 0 = replication data,
//! 1 = truth/oracle draws.
inline constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream,
                                           std::uint64_t index) noexcept {
  return mix64(mix64(root + 0x9E3779B97F4A7C15ULL * (stream + 1)) ^
               (0xD1B54A32D192ED03ULL * (index + 1)));
}

//! Deterministic sampler built on mt19937_64 with explicit transforms.
//!
//! std::normal_distribution and friends are implementation-defined, so this
//! class spells out every transform (uniform via 53-bit shift, normals via
//! Box-Muller) to keep streams stable across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  //! Uniform draw in [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  //! Uniform draw in (0, 1].
  double uniform01_open_low() { return 1.0 - uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  //! Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01_open_low();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  //! Chi-square draw as a sum of squared normals (definitional, small df only).
  double chi_squared(int df) {
    double sum = 0.0;
    for (int i = 0; i < df; ++i) {
      const double z = normal();
      sum += z * z;
    }
    return sum;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dqr

#endif  // DQR_RNG_HPP_
