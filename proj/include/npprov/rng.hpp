#pragma once

#include <cmath>
#include <cstdint>

namespace npprov {

// splitmix64 finalizer; bijective on 64-bit words
inline uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline uint64_t hash_mix(uint64_t a, uint64_t b) {
    return mix64(a + 0x9E3779B97F4A7C15ull + mix64(b));
}

// Counter-based generator: the stream is a pure function of
// (seed, index, stream, draw counter), so any draw can be produced in
// isolation and parallel callers never share state.
class CounterRng {
public:
    explicit CounterRng(uint64_t seed, uint64_t index = 0, uint64_t stream = 0)
        : key_(hash_mix(hash_mix(seed, index), stream)) {}

    uint64_t next_u64() { return mix64(key_ + 0x9E3779B97F4A7C15ull * ++counter_); }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

    // inclusive bounds; modulo bias is negligible for the small ranges used here
    int64_t uniform_int(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }

    // standard normal via Box-Muller; two uniforms per draw keeps the
    // counter mapping one-to-one without cached state
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

private:
    uint64_t key_;
    uint64_t counter_ = 0;
};

// stream ids, so distinct uses of one (seed, index) pair never collide
namespace rng_stream {
inline constexpr uint64_t kCounts = 1;
inline constexpr uint64_t kPositions = 2;
inline constexpr uint64_t kGpSample = 3;
inline constexpr uint64_t kClip = 4;
inline constexpr uint64_t kSubsample = 5;
inline constexpr uint64_t kMask = 6;
inline constexpr uint64_t kInit = 7;
inline constexpr uint64_t kEval = 8;
}  // namespace rng_stream

}  // namespace npprov
