#pragma once

// Seeded sampling helpers on top of std::mt19937_64. The standard
// distributions are implementation-defined; these are not, so datasets and
// scenarios are byte-identical across standard libraries.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace aisgap::rnd {

using Engine = std::mt19937_64;

/// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Engine& e) { return static_cast<double>(e() >> 11) * 0x1.0p-53; }

inline double uniform(Engine& e, double lo, double hi) { return lo + (hi - lo) * uniform01(e); }

/// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
inline std::uint64_t below(Engine& e, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = e();
    } while (x >= limit);
    return x % n;
}

inline bool bernoulli(Engine& e, double p) { return uniform01(e) < p; }

/// Standard normal via Box-Muller (one value per call).
inline double normal(Engine& e) {
    double u1 = uniform01(e);
    while (u1 <= 0.0) u1 = uniform01(e);
    const double u2 = uniform01(e);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double log_uniform(Engine& e, double lo, double hi) {
    return std::exp(uniform(e, std::log(lo), std::log(hi)));
}

inline double exponential(Engine& e, double mean) {
    return -mean * std::log(1.0 - uniform01(e));
}

template <class T>
void shuffle(std::vector<T>& v, Engine& e) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(below(e, i));
        std::swap(v[i - 1], v[j]);
    }
}

/// Derives an independent stream from a base seed and a tag.
inline Engine derive(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
    return Engine(seq);
}

}  // namespace aisgap::rnd
