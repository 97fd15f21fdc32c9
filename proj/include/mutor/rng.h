#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace mutor {

using Rng = std::mt19937_64;

// Independent stream for a (seed, index, epoch, ...) tuple. std::seed_seq's
// mixing is fixed by the standard, so streams are reproducible everywhere.
inline Rng derive_stream(std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  words.reserve(keys.size() * 2);
  for (std::uint64_t k : keys) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

// Uniform integer in [lo, hi].
template <typename Int>
Int uniform_int(Rng& rng, Int lo, Int hi) {
  return std::uniform_int_distribution<Int>(lo, hi)(rng);
}

}  // namespace mutor
