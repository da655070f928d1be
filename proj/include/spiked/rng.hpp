#pragma once

#include <cstdint>
#include <random>

namespace spiked {

// SplitMix64 finalizer. Used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Sub-seed for stream `index` of a run seeded with `seed`. Depends only on the
// pair, so trials can be generated in any order and on any thread.
constexpr std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

// Deterministic random source. The engine is the standard 64-bit Mersenne
// twister; all derived variates (uniforms, bounded integers, normals, gammas)
// are computed here rather than with <random> distributions, whose output is
// implementation-defined. Normals use the 128-layer ziggurat (Marsaglia-Tsang
// layout, Doornik's tail and wedge handling).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on the open interval (0, 1).
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound), bound > 0 (Lemire's multiply-and-reject).
  std::uint64_t uniform_index(std::uint64_t bound);

  // Standard normal N(0, 1).
  double normal();

  // Gamma(shape, 1), shape > 0 (Marsaglia-Tsang squeeze).
  double gamma(double shape);

 private:
  std::mt19937_64 engine_;
};

}  // namespace spiked
