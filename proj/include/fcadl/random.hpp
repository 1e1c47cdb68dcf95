#pragma once

// Seeded randomness shared by the generator, the walker and LMDS. The engine is
// std::mt19937_64; the distributions are written out here because the standard
// library distributions are not bit-reproducible across implementations.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace fcadl {

inline constexpr const char* kPrngName = "mt19937_64";

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent substream for (seed, stream): parallel and serial consumers
/// that derive engines this way draw identical sequences.
inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(stream + 0x5851F42D4C957F2DULL)));
}

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n).
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
    // Lemire-style rejection keeps the draw unbiased.
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

/// Box-Muller; one variate per call keeps streams position-independent.
inline double gaussian(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) {
        u1 = uniform01(rng);
    }
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace fcadl
