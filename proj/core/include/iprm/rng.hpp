#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace iprm {

// Deterministic seeding utilities. std::mt19937_64 is fully specified by
// the standard, but the <random> distributions are not, so every draw that
// must reproduce bit-for-bit across platforms goes through the helpers here.

// SplitMix64 finalizer. Reference: Steele, Lea, Flood (2014).
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream derivation: derive_seed(seed, i) names the i-th child stream of
// `seed`. Nested calls derive sub-streams, e.g. (seed, step, rollout) ->
// derive_seed(derive_seed(seed, step), rollout).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x9e3779b97f4a7c15ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

// FNV-1a, for deriving streams from string keys (problem ids).
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Uniform double in [0, 1) from the top 53 bits of one engine output.
inline double next_double(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Uniform double in [lo, hi).
inline double next_double(std::mt19937_64& eng, double lo, double hi) {
  return lo + (hi - lo) * next_double(eng);
}

// Uniform integer in [0, n). Rejection-free modulo is fine here: n is tiny
// (vocabulary sizes, index ranges) relative to 2^64, so the bias is
// far below anything observable in these tests.
inline std::uint64_t next_index(std::mt19937_64& eng, std::uint64_t n) {
  return eng() % n;
}

// Draw from a discrete distribution given by `probs` (assumed to sum to 1).
// Walks the CDF; the final bucket absorbs rounding slack.
inline std::size_t next_categorical(std::mt19937_64& eng, std::span<const double> probs) {
  const double u = next_double(eng);
  double cum = 0.0;
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return i;
  }
  return probs.size() - 1;
}

// Deterministic Fisher-Yates (std::shuffle is implementation-defined).
template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::mt19937_64& eng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(next_index(eng, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace iprm
