#pragma once

#include <cstdint>
#include <random>

namespace sysid {

/// Deterministic RNG used throughout. Wraps a 64-bit Mersenne twister and a
/// standard-normal sampler; copying it copies the full stream state.
class SeededRng {
public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// splitmix64 finalizer; a bijective 64-bit mix.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Independent seeds for one run, all derived from a single master seed.
struct RunSeeds {
  std::uint64_t system;
  std::uint64_t stream;
  std::uint64_t init;
  std::uint64_t scheduler;
};

RunSeeds derive_seeds(std::uint64_t master) noexcept;

}  // namespace sysid
