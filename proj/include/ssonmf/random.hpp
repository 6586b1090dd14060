#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace ssonmf {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix64(seed ^ mix64(stream));
}

// Uniform in [0, 1) with 53 random bits; independent of the standard library's
// distribution implementations.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Unit-scale Laplacian via inverse CDF.
inline double laplace(Rng& rng) {
    double u = uniform01(rng) - 0.5;
    while (u == -0.5) u = uniform01(rng) - 0.5;
    return u < 0.0 ? std::log1p(2.0 * u) : -std::log1p(-2.0 * u);
}

// Standard normal via Box-Muller (one draw per call, the pair partner is discarded
// so the stream position depends only on the call count).
inline double gaussian(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 == 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace ssonmf
