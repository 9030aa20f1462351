#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <span>

// Counter-based Gaussian stream: every deviate is a pure function of
// (seed, coordinate tuple). No generator state exists, so draws are
// reproducible under any evaluation order and any number of workers,
// and re-sampling one coordinate never disturbs another.

namespace blirp {

namespace detail {

// SplitMix64 finalizer; bijective avalanche mix.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Chain-hash a coordinate tuple into one 64-bit state.
inline std::uint64_t hash_coords(std::uint64_t seed, std::span<const std::uint64_t> coords) {
    std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc909ULL);
    for (std::uint64_t c : coords) h = mix64(h ^ c);
    return h;
}

// Uniform in (0,1) from the top 53 bits; offset keeps it away from 0.
inline double uniform01(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace detail

// One standard normal deviate keyed by (seed, coords). Distinct tuples give
// statistically independent values; identical tuples give identical values.
inline double gaussian_stream(std::uint64_t seed, std::span<const std::uint64_t> coords) {
    const std::uint64_t h = detail::hash_coords(seed, coords);
    const double u1 = detail::uniform01(detail::mix64(h ^ 0xd1b54a32d192ed03ULL));
    const double u2 = detail::uniform01(detail::mix64(h ^ 0x8cb92ba72f3d8dd7ULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double gaussian_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) {
    return gaussian_stream(seed, std::span<const std::uint64_t>(coords.begin(), coords.size()));
}

// Uniform 64-bit words on the same keyed-stream contract.
inline std::uint64_t uniform_bits(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) {
    return detail::mix64(detail::hash_coords(
        seed, std::span<const std::uint64_t>(coords.begin(), coords.size())));
}

} // namespace blirp
