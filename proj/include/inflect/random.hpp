#pragma once

#include <cstdint>

namespace inflect {

// Independent seed for a named stream of a run (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kDropout = 3;
inline constexpr std::uint64_t kHallucination = 4;
inline constexpr std::uint64_t kSubsample = 5;
inline constexpr std::uint64_t kVote = 6;
}  // namespace stream

}  // namespace inflect
