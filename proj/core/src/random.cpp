#include "sysid/random.hpp"

namespace sysid {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RunSeeds derive_seeds(std::uint64_t master) noexcept {
  // Successive splitmix64 outputs; each role gets its own stream.
  const std::uint64_t base = mix64(master);
  return RunSeeds{
      .system = mix64(base ^ 0x1ULL),
      .stream = mix64(base ^ 0x2ULL),
      .init = mix64(base ^ 0x3ULL),
      .scheduler = mix64(base ^ 0x4ULL),
  };
}

}  // namespace sysid
