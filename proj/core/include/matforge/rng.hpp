#pragma once

#include <cstdint>
#include <initializer_list>

namespace matforge {

/// SplitMix64 finalizer; used to derive independent stream keys.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Folds a list of counters (seed, purpose, pixel, ...) into one key.
constexpr std::uint64_t stream_key(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x6a09e667f3bcc909ULL;
    for (std::uint64_t p : parts) h = mix64(h ^ mix64(p));
    return h;
}

/// PCG32 stream keyed by a counter tuple, so results do not depend on the
/// order in which workers consume streams. Satisfies UniformRandomBitGenerator.
class Rng {
public:
    using result_type = std::uint32_t;

    explicit Rng(std::uint64_t key) : state_(0), inc_((mix64(key ^ 0xda3e39cb94b95bdbULL) << 1u) | 1u) {
        next();
        state_ += mix64(key);
        next();
    }
    Rng(std::initializer_list<std::uint64_t> parts) : Rng(stream_key(parts)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return 0xffffffffu; }
    result_type operator()() { return next(); }

    std::uint32_t next() {
        const std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        const auto rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        const std::uint64_t hi = next();
        const std::uint64_t lo = next();
        return static_cast<double>(((hi << 32) | lo) >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n).
    std::uint32_t uniform_index(std::uint32_t n) {
        // Lemire's nearly-divisionless bounded draw.
        std::uint64_t m = static_cast<std::uint64_t>(next()) * n;
        auto l = static_cast<std::uint32_t>(m);
        if (l < n) {
            const std::uint32_t t = (-n) % n;
            while (l < t) {
                m = static_cast<std::uint64_t>(next()) * n;
                l = static_cast<std::uint32_t>(m);
            }
        }
        return static_cast<std::uint32_t>(m >> 32);
    }

private:
    std::uint64_t state_;
    std::uint64_t inc_;
};

}  // namespace matforge
