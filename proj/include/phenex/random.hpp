#pragma once

// Draws built directly on the raw engine output. The std:: distributions are
// implementation-defined, which would make seeded artifacts differ between
// standard libraries.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace phenex {

using Engine = std::mt19937_64;

/// Uniform integer in [0, bound). bound must be > 0.
inline std::uint64_t uniform_below(Engine& rng, std::uint64_t bound) {
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    for (;;) {
        const std::uint64_t r = rng();
        if (r < limit) return r % bound;
    }
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Engine& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Engine& rng, double p) { return uniform01(rng) < p; }

inline double standard_normal(Engine& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Poisson by inversion; fine for the small means used by the generators.
inline std::uint32_t poisson(Engine& rng, double mean) {
    const double u = uniform01(rng);
    double p = std::exp(-mean);
    double cdf = p;
    std::uint32_t k = 0;
    while (u > cdf && k < 10000) {
        ++k;
        p *= mean / k;
        cdf += p;
    }
    return k;
}

template <typename T>
void shuffle(std::span<T> values, Engine& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(values[i - 1], values[j]);
    }
}

inline std::vector<std::uint32_t> random_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::uint32_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<std::uint32_t>(i);
    Engine rng(seed);
    shuffle(std::span<std::uint32_t>(perm), rng);
    return perm;
}

} // namespace phenex
