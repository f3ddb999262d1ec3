#pragma once

#include <cmath>
#include <cstdint>

namespace jlssabs::rng {

// Counter-derived streams: every (seed, trial, role, channel) tuple owns an
// independent SplitMix64 sequence, so results do not depend on the parallel
// schedule. Distribution sampling is implemented here rather than taken from
// <random> because libstdc++'s distributions are not pinned across releases.

inline std::uint64_t splitmix_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

enum class Role : std::uint64_t {
    Brownian = 1,
    Poisson = 2,
    Input = 3,
    Init = 4,
    Verify = 5,
    AbstractBrownian = 6,  // independent-driver mode only
    AbstractPoisson = 7,
};

class Stream {
  public:
    Stream(std::uint64_t master_seed, std::uint64_t trial, Role role,
           std::uint64_t channel = 0) {
        std::uint64_t h = master_seed;
        splitmix_next(h);
        h ^= 0xD1B54A32D192ED03ull * (trial + 1);
        splitmix_next(h);
        h ^= 0x9E6C63D0876A9ABDull * (static_cast<std::uint64_t>(role) + 1);
        splitmix_next(h);
        h ^= 0xC2B2AE3D27D4EB4Full * (channel + 1);
        splitmix_next(h);
        state_ = h;
    }

    std::uint64_t next_u64() { return splitmix_next(state_); }

    /// Uniform in (0, 1), 53-bit resolution, never exactly 0.
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; the pair's second member is cached.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    /// Poisson(mean) by inversion; intended for small means (mean <= ~10).
    std::uint32_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        const double L = std::exp(-mean);
        double p = 1.0;
        std::uint32_t k = 0;
        do {
            p *= uniform01();
            if (p < L) break;
            ++k;
        } while (k < 1000000);
        return k;
    }

  private:
    std::uint64_t state_ = 0;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace jlssabs::rng
