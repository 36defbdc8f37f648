// Copyright 2026 The trigsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded randomness with a documented, portable seed -> sequence mapping.
//
// Engine: std::mt19937_64 seeded with the 64-bit seed (the engine's output
// sequence is fixed by the C++ standard). Doubles in [0, 1) take the top 53
// bits of one engine output: (x >> 11) * 2^-53. Bounded integers use
// rejection sampling on whole engine outputs. None of the std distribution
// classes are used because their algorithms differ between standard
// libraries.
#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace trigsim {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Per-item seed from a run seed, a purpose tag and an item key (frame id).
// Independent of the order in which items are processed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose, std::string_view key) {
  return mix64(mix64(seed ^ fnv1a(purpose)) ^ fnv1a(key));
}

}  // namespace trigsim
