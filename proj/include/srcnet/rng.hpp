#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace srcnet {

/// SplitMix64 generator. The state advances by the golden-ratio constant and
/// the output function is the usual two-round mix. Uniforms take the top 53
/// bits, Gaussians come from Box-Muller (two uniforms per call, cosine branch
/// only, no caching), exponentials from the inverse CDF. Every draw is a pure
/// function of the stream state, so sequences replay bit-exactly anywhere.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal. Uses log1p(-u) so u == 0 is safe.
    double gaussian() {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Exponential draw with the given mean: -mean * ln(1 - u).
    double exponential(double mean) { return -mean * std::log1p(-uniform()); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

private:
    std::uint64_t state_;
};

/// Derives an independent child seed: one SplitMix64 output of (master XOR index).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return RngStream(master ^ index).next_u64();
}

// Stream-purpose tags, XORed into derivation indices so that scene synthesis,
// weight init and epoch shuffles never share a stream.
inline constexpr std::uint64_t kStreamGenInit = 0x67656E5F696E6974ull;
inline constexpr std::uint64_t kStreamDiscInit = 0x646973635F696E69ull;
inline constexpr std::uint64_t kStreamShuffle = 0x73687566666C6521ull;

}  // namespace srcnet
