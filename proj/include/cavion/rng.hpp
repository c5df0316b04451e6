#pragma once

#include <bit>
#include <cstdint>
#include <random>

namespace cavion {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Independent generator for substream `stream` of a run seeded with `seed`.
// Streams are addressed by content (chunk index, grid value), never by the
// order in which work happens to execute.
inline Rng substream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ull)));
}

inline std::uint64_t stream_key(double value) {
    return std::bit_cast<std::uint64_t>(value == 0.0 ? 0.0 : value);
}

} // namespace cavion
