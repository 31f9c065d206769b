#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

#include "twostage/stats.hpp"

namespace twostage {

// SplitMix64 mixing step. Used for seeding and for deriving child seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Child seed for (master, index, tag). Bit-exact definition:
//   h = splitmix64(master)
//   h = splitmix64(h ^ (index + 0x9E3779B97F4A7C15))
//   h = splitmix64(h ^ (tag   + 0xD1B54A32D192ED03))
// Every stochastic component derives its stream this way, so results are
// reproducible independently of scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                 std::uint64_t tag) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ (index + 0x9E3779B97F4A7C15ULL));
    h = splitmix64(h ^ (tag + 0xD1B54A32D192ED03ULL));
    return h;
}

// Stream tags (third argument of derive_seed).
enum : std::uint64_t {
    kTagPopulation = 1,
    kTagReplicate = 2,
    kTagReference = 3,
    kTagPsuSizes = 4,
    kTagPsuEffect = 5,
    kTagSsuNoise = 6,
    kTagCell = 7,
};

// Deterministic random stream. All draws are defined on top of the raw
// mt19937_64 output so that sequences are identical across platforms and
// standard libraries (std::*_distribution is implementation-defined and
// is deliberately not used).
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : gen_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on [0,1), 53-bit resolution.
    double next_double() { return double(gen_() >> 11) * 0x1.0p-53; }

    // Uniform on (0,1); safe to feed to quantile functions.
    double next_open() { return (double(gen_() >> 11) + 0.5) * 0x1.0p-53; }

    // Uniform integer on [0, bound). Lemire multiply-shift with rejection.
    std::uint64_t next_below(std::uint64_t bound) {
        if (bound == 0) throw std::invalid_argument("next_below: bound must be positive");
        unsigned __int128 m = (unsigned __int128)next_u64() * bound;
        auto lo = (std::uint64_t)m;
        if (lo < bound) {
            const std::uint64_t t = (-bound) % bound;
            while (lo < t) {
                m = (unsigned __int128)next_u64() * bound;
                lo = (std::uint64_t)m;
            }
        }
        return (std::uint64_t)(m >> 64);
    }

    // Standard normal via inverse CDF.
    double next_normal() { return normal_quantile(next_open()); }

    // Gamma(shape, scale), Marsaglia-Tsang squeeze; shape < 1 handled by boosting.
    double next_gamma(double shape, double scale) {
        if (shape <= 0.0 || scale <= 0.0)
            throw std::invalid_argument("next_gamma: shape and scale must be positive");
        if (shape < 1.0) {
            const double u = next_open();
            return next_gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = next_normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = next_open();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace twostage
