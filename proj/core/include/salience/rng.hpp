#pragma once

#include <cstdint>
#include <random>

namespace salience {

/// splitmix64 step; used to derive well-mixed child seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic sub-stream seed for (seed, stream_id). Independent streams
/// make parallel simulation and fold training schedule-independent.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id) {
    std::uint64_t s = seed ^ (0x2545f4914f6cdd1dULL * (stream_id + 1));
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ (b << 1);
}

/// Engine owned by one logical stream (one agent, one fold, one restart).
inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
    return std::mt19937_64(derive_seed(seed, stream_id));
}

} // namespace salience
