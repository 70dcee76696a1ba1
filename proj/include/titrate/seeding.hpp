#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace titrate {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based seed split: a child seed is a pure function of the parent seed
// and a path of counters, so streams can be created in any order or thread.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(parent);
  for (auto c : path) s = mix64(s ^ mix64(c + 0x632be59bd9b4e019ULL));
  return s;
}

inline Rng make_rng(std::uint64_t parent, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(parent, path));
}

// Named stream ids used throughout the workbench.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kBatch = 2;
inline constexpr std::uint64_t kEnvironment = 3;  // patient + targets
inline constexpr std::uint64_t kNoise = 4;        // measurement noise
inline constexpr std::uint64_t kAction = 5;       // stochastic action draws
inline constexpr std::uint64_t kCampaign = 6;
}  // namespace stream

}  // namespace titrate
