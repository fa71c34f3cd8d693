#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace attnroute {

// splitmix64 is the single seed-derivation primitive used everywhere
// determinism matters: weights, sampling noise, synthetic sources, suite
// seeds. Identical seeds give bit-identical streams on every run.
inline uint64_t splitmix64_next(uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Derives a fresh stream key from two 64-bit values.
inline uint64_t mix64(uint64_t a, uint64_t b) {
    uint64_t s = a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
    return splitmix64_next(s);
}

// FNV-1a, for keying streams by string labels.
inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

class SplitMix {
  public:
    explicit SplitMix(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() { return splitmix64_next(state_); }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0); }

    float next_uniform(float lo, float hi) { return lo + (hi - lo) * static_cast<float>(next_double()); }

    // Box-Muller; consumes exactly two draws per call.
    float next_gaussian() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) {
            u1 = 1e-300;
        }
        constexpr double two_pi = 6.283185307179586476925286766559;
        return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2));
    }

  private:
    uint64_t state_;
};

}  // namespace attnroute
