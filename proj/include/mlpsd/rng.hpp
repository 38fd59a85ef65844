#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace mlpsd {

using Rng = std::mt19937_64;

/// Derives an independent generator from a root seed and a path of stream
/// indices, e.g. make_rng(seed, {tag, sample_index}). Streams with different
/// paths do not overlap in practice and never depend on each other's draws.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
    std::vector<std::uint32_t> words;
    words.reserve(2 + 2 * path.size());
    auto push = [&words](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    for (auto p : path) push(p);
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

/// SplitMix64 finalizer; a cheap stateless hash for index-keyed decisions.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Uniform double in [0,1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Stream tags keep unrelated consumers of one root seed apart.
namespace stream {
inline constexpr std::uint64_t prototypes = 1;
inline constexpr std::uint64_t samples = 2;
inline constexpr std::uint64_t kmeans = 3;
inline constexpr std::uint64_t random_partition = 4;
inline constexpr std::uint64_t init = 5;
inline constexpr std::uint64_t shuffle = 6;
inline constexpr std::uint64_t split = 7;
} // namespace stream

} // namespace mlpsd
