#ifndef RTFEST_RANDOM_HPP
#define RTFEST_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

#include "rtfest/linalg.hpp"

namespace rtfest {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed for the stream addressed by (seed, c0, c1, ...). Independent of the order in
// which streams are requested, so parallel trials reproduce serial runs.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> counters) {
    std::uint64_t h = mix64(seed);
    for (std::uint64_t c : counters) h = mix64(h ^ mix64(c + 0x632be59bd9b4e019ULL));
    return h;
}

inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> counters = {}) {
    return Rng(derive_seed(seed, counters));
}

// Circularly symmetric CN(0, 1): real and imaginary parts i.i.d. N(0, 1/2).
inline CMatrix complex_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> n(0.0, std::sqrt(0.5));
    CMatrix out(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) {
            const double re = n(rng);
            const double im = n(rng);
            out(i, j) = cplx(re, im);
        }
    return out;
}

inline double uniform(double lo, double hi, Rng& rng) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace rtfest

#endif
