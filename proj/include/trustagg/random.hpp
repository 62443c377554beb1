#pragma once

#include <cstdint>
#include <random>

namespace trustagg {

/// Independent random streams derived from one root seed.
enum class Stream : std::uint64_t {
  split = 1,
  classifier = 2,
  aggregator = 3,
  synth = 4,
  label_noise = 5,
  verify = 6,
};

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for (root, trial, stream). Every random draw in a run goes through
/// this so that trial t of stream s is reproducible in isolation.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t trial,
                                    Stream stream) noexcept {
  return mix64(mix64(mix64(root) ^ trial) ^ static_cast<std::uint64_t>(stream));
}

using Rng = std::mt19937_64;

}  // namespace trustagg
