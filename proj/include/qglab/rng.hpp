#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace qglab {

// Explicit distributions on top of mt19937_64 so random streams are stable
// across standard library implementations.

inline double rng_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
}

inline double rng_normal(std::mt19937_64& rng) {
    double u1 = 0.0;
    do { u1 = rng_uniform(rng); } while (u1 <= 0.0);
    const double u2 = rng_uniform(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline uint64_t rng_below(std::mt19937_64& rng, uint64_t n) { return rng() % n; }

template <typename T>
void rng_shuffle(std::mt19937_64& rng, std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng_below(rng, i)]);
}

// Deterministic seed splitting for independent sub-streams.
inline uint64_t split_seed(uint64_t root, uint64_t stream) {
    uint64_t z = root + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace qglab
