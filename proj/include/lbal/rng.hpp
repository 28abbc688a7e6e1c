#ifndef LBAL_RNG_HPP
#define LBAL_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace lbal {

// splitmix64 finalizer. Maps 0 to 0.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Seed for round `round` of a multi-round strategy. Round 0 keeps the base seed,
// and later rounds never depend on how many rounds follow.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t round) {
    return seed ^ mix64(round * 0x9E3779B97F4A7C15ULL);
}

/// xoshiro256** seeded through splitmix64. Every draw below is specified
/// exactly so that index streams can be reproduced outside C++:
///   - uniform_below(b): draw x until x >= (2^64 - b) mod b, return x mod b
///   - uniform01():      (x >> 11) * 2^-53
///   - normal():         Box-Muller cos branch on (1 - u1, u2), one value per call
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& word : state_) {
            s += 0x9E3779B97F4A7C15ULL;
            word = mix64(s);
        }
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()() { return next(); }

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t uniform_below(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t x = next();
            if (x >= threshold) return x % bound;
        }
    }

    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double normal() {
        const double u1 = 1.0 - uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
};

}  // namespace lbal

#endif  // LBAL_RNG_HPP
