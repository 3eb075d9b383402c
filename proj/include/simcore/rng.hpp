#pragma once

#include <cmath>
#include <cstdint>
#include <random>

// Deterministic randomness helpers. std::mt19937_64 output is fully specified
// by the standard, but the std distribution adaptors are not; everything here
// maps engine output to samples with a fixed algorithm so that results are
// bit-identical across standard libraries and platforms.
namespace simcore::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Combine two seeds into one stream seed.
inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b));
}

inline std::mt19937_64 engine(std::uint64_t seed) {
    return std::mt19937_64(splitmix64(seed));
}

// Uniform integer in [0, n) via rejection sampling (no modulo bias).
inline std::uint64_t below(std::mt19937_64& g, std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
        v = g();
    } while (v >= limit);
    return v % n;
}

// Uniform double in [0, 1), 53-bit resolution.
inline double unit(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Standard normal deviates via Box-Muller; caches the paired sample.
class Gaussian {
public:
    double operator()(std::mt19937_64& g) {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = unit(g);
        while (u1 <= 0.0) u1 = unit(g);
        const double u2 = unit(g);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace simcore::rng
