#pragma once

#include <cstdint>

namespace opfgen {

/// One splitmix64 step.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Stream seed for item `index` of `batch`; `stream` separates independent uses.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t batch, std::uint64_t index,
                                    std::uint64_t stream = 0) {
  std::uint64_t s = splitmix64(seed ^ 0x6A09E667F3BCC909ULL);
  s = splitmix64(s ^ stream);
  s = splitmix64(s ^ batch);
  return splitmix64(s ^ index);
}

}  // namespace opfgen
