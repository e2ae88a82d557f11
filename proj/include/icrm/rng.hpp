#pragma once

// Deterministic, platform-independent random number generation.
// std::mt19937 engines are portable but the standard distributions are not,
// so every draw here is spelled out on top of splitmix64.

#include <cmath>
#include <cstdint>

namespace icrm {

inline constexpr std::uint64_t kSeedGolden = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += kSeedGolden;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent stream seed from (seed, stream ids). Each item of a
// parallel sweep gets mix(seed, i) so construction order never matters.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                              std::uint64_t c = 0) {
    std::uint64_t s = seed;
    splitmix64(s);
    s ^= a + kSeedGolden + (s << 6) + (s >> 2);
    splitmix64(s);
    s ^= b + kSeedGolden + (s << 6) + (s >> 2);
    splitmix64(s);
    s ^= c + kSeedGolden + (s << 6) + (s >> 2);
    return splitmix64(s);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform on [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a log argument.
    double uniform01_open0() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Box-Muller; always consumes exactly two words.
    double normal() {
        const double u1 = uniform01_open0();
        const double u2 = uniform01();
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    // Uniform integer in [0, n). Modulo bias is < n/2^64, irrelevant here.
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  private:
    std::uint64_t state_;
};

}  // namespace icrm
