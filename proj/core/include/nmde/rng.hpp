#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

namespace nmde {

/// Engine used everywhere. Distributions come from Boost.Random so that draw
/// sequences are identical across standard library implementations.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Split rule: stream `s` of master seed `k` is an mt19937_64 seeded with
/// splitmix64(k ^ splitmix64(s)). Streams for distinct `s` are independent for
/// all practical purposes and do not depend on thread scheduling.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(splitmix64(seed ^ splitmix64(stream)));
}

inline double std_normal(Rng& rng) {
    boost::random::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

inline double uniform01(Rng& rng) {
    boost::random::uniform_01<double> dist;
    return dist(rng);
}

inline double gamma_draw(Rng& rng, double shape, double scale = 1.0) {
    boost::random::gamma_distribution<double> dist(shape, scale);
    return dist(rng);
}

/// Draw from an inverse-gamma(shape, scale) law: 1 / Gamma(shape, 1/scale).
inline double inverse_gamma_draw(Rng& rng, double shape, double scale) {
    return scale / gamma_draw(rng, shape, 1.0);
}

inline double lognormal_draw(Rng& rng, double location, double scale) {
    return std::exp(location + scale * std_normal(rng));
}

/// +1 or -1 with equal probability.
inline int rademacher(Rng& rng) {
    boost::random::uniform_int_distribution<int> dist(0, 1);
    return dist(rng) == 0 ? -1 : 1;
}

}  // namespace nmde
