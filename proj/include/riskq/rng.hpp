#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <stdexcept>

namespace riskq {

/// One splitmix64 step: advances `state` and returns the next word.
/// Used for seed derivation only, never as the sampling generator.
inline uint64_t splitmix64_next(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Collapses (master seed, stream tags...) into one 64-bit seed by feeding
/// each word through splitmix64. Distinct tag tuples give statistically
/// independent streams, and the map is pure: the same words always produce
/// the same seed regardless of call order.
inline uint64_t derive_seed(std::initializer_list<uint64_t> words) {
    uint64_t state = 0x6a09e667f3bcc908ULL; // sqrt(2) fraction bits
    uint64_t out = 0;
    for (uint64_t w : words) {
        state ^= w + 0x9e3779b97f4a7c15ULL + (state << 6) + (state >> 2);
        out = splitmix64_next(state);
    }
    return out;
}

/// Deterministic random stream: mt19937_64 with explicit real-valued
/// conversions so that sequences are reproducible bit-for-bit across
/// platforms (no std::uniform_real_distribution, whose output is
/// implementation-defined).
class RngStream {
  public:
    explicit RngStream(uint64_t seed) : gen_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in (0, 1]; safe as a log() argument.
    double uniform_pos() {
        return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). Rejection sampling, so the draw is
    /// unbiased for every n.
    uint64_t uniform_int(uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal draw via the Box-Muller transform (cosine branch,
    /// no pair caching: exactly two uniforms are consumed per draw, which
    /// keeps substream alignment independent of call history).
    double normal() {
        const double u1 = uniform_pos();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

  private:
    std::mt19937_64 gen_;
};

} // namespace riskq
