#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace clvid {

// std::mt19937_64 output is fixed by the standard, but the std distributions
// are not. These helpers keep every draw reproducible across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound). Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t bound) {
        if (bound <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    // Box-Muller; the spare value is discarded to keep the stream stateless.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
        return mean + stddev * z;
    }

    template <typename It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            const auto j = below(i);
            std::iter_swap(first + (i - 1), first + j);
        }
    }

private:
    std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t child_seed(std::uint64_t parent, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    return mix_seed(mix_seed(mix_seed(parent ^ mix_seed(a)) ^ mix_seed(b + 0x51ULL)) ^ mix_seed(c + 0xA3ULL));
}

} // namespace clvid
