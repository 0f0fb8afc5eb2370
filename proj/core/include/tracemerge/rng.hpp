#pragma once

#include <array>
#include <cstdint>

namespace tracemerge {

/// One splitmix64 step from state `x`:
///   z = x + 0x9E3779B97F4A7C15
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    std::uint64_t z = x + 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Maps the top 53 bits of `x` to [0, 1): (x >> 11) * 2^-53.
constexpr double unit_double(std::uint64_t x) noexcept { return static_cast<double>(x >> 11) * 0x1.0p-53; }

/// xoshiro256** seeded from splitmix64: s[i] = splitmix64(seed + i * 0x9E3779B97F4A7C15).
/// Single owner per decode stream.
class Rng {
public:
    explicit constexpr Rng(std::uint64_t seed) noexcept {
        for (int i = 0; i < 4; ++i) state_[i] = splitmix64(seed + static_cast<std::uint64_t>(i) * 0x9E3779B97F4A7C15ull);
    }

    constexpr std::uint64_t next_u64() noexcept {
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

    /// Uniform in [0, 1) with 53 bits of resolution.
    constexpr double uniform() noexcept { return unit_double(next_u64()); }

    friend constexpr bool operator==(const Rng &, const Rng &) = default;

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
};

/// Seed of the thinking stream for trace k: seed ^ splitmix64(k).
constexpr std::uint64_t thinking_seed(std::uint64_t seed, std::uint64_t trace_index) noexcept {
    return seed ^ splitmix64(trace_index);
}

/// Seed of the standalone answer stream used for per-trace voting answers.
constexpr std::uint64_t voting_seed(std::uint64_t seed, std::uint64_t trace_index) noexcept {
    return splitmix64(seed ^ splitmix64(trace_index));
}

} // namespace tracemerge
