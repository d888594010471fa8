#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ppcreg {

// All randomness in the project flows through std::mt19937_64 (the engine is
// fully specified by the standard, so streams are bit-identical on every
// platform) with the hand-rolled draws below instead of std::*_distribution,
// whose outputs are implementation-defined.
using Rng = std::mt19937_64;

/// splitmix64 finalizer, used to derive independent per-sample seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Seed of the sub-stream `index` of a master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(seed ^ mix64(index));
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Standard normal via Box-Muller. Consumes exactly two engine draws.
inline double normal01(Rng& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    // Guard against log(0).
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

} // namespace ppcreg
