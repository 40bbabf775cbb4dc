#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace icrl {

// splitmix64 step; used to derive decorrelated stream seeds from one run seed.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(split_seed(seed, stream));
}

// Stable stream ids so reordering call sites cannot silently change a run.
namespace rng_stream {
constexpr std::uint64_t init_policy = 1;
constexpr std::uint64_t init_constraint = 2;
constexpr std::uint64_t rollouts = 3;
constexpr std::uint64_t backward = 4;
constexpr std::uint64_t expert = 5;
constexpr std::uint64_t eval = 6;
constexpr std::uint64_t baseline = 7;
}  // namespace rng_stream

}  // namespace icrl
