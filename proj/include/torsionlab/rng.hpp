#pragma once

// Deterministic random source shared by both backends.
//
// splitmix64 with the standard constants; identical 64-bit streams on every
// platform, so seeded runs are bit-reproducible.  Doubles take the top 53
// bits of the stream.

#include <cstdint>

namespace torsionlab {

struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [-1, 1).
    double next_signed() { return 2.0 * next_double() - 1.0; }

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    // Small signed integer in [-m, m], for exact-backend data.
    long next_small_int(long m) {
        return static_cast<long>(next_below(static_cast<std::uint64_t>(2 * m + 1))) - m;
    }
};

} // namespace torsionlab
