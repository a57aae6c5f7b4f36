#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace loopforge {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Child-seed derivation rule: replica i of master seed s gets
/// splitmix64 of (s advanced i+1 times). Documented so that concurrent
/// replicas are reproducible independently of scheduling.
inline std::uint64_t child_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master + (index + 1) * 0x9e3779b97f4a7c15ULL;
    return splitmix64(s);
}

/// Deterministic RNG wrapper. All draws go through hand-rolled
/// transformations so that outputs depend only on the mt19937_64 stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return (next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n), n > 0. Rejection sampling, unbiased.
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_below: n == 0");
        std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    /// Uniform 128-bit integer in [0, n), n > 0. Unbiased.
    unsigned __int128 uniform_below_u128(unsigned __int128 n) {
        if (n == 0) throw std::invalid_argument("uniform_below_u128: n == 0");
        unsigned __int128 threshold = (-n) % n;
        for (;;) {
            unsigned __int128 r =
                (static_cast<unsigned __int128>(next_u64()) << 64) | next_u64();
            if (r >= threshold) return r % n;
        }
    }

    int uniform_direction4() { return static_cast<int>(uniform_below(4)); }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Poisson by inversion (mean expected small at call sites; falls back
    /// to normal-approximation-free chunking for larger means).
    std::uint64_t poisson(double mean) {
        if (mean < 0) throw std::invalid_argument("poisson: negative mean");
        if (mean == 0) return 0;
        std::uint64_t total = 0;
        // Split large means so exp(-chunk) stays away from underflow.
        while (mean > 32.0) {
            total += poisson_small_(32.0);
            mean -= 32.0;
        }
        return total + poisson_small_(mean);
    }

    /// Standard normal via Box-Muller (pairs cached).
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform01(), u2 = uniform01();
        while (u1 <= 0) u1 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t poisson_small_(double mean) {
        double limit = std::exp(-mean);
        double prod = uniform01();
        std::uint64_t k = 0;
        while (prod > limit) {
            prod *= uniform01();
            ++k;
        }
        return k;
    }

    std::mt19937_64 engine_;
    std::uint64_t seed_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace loopforge
