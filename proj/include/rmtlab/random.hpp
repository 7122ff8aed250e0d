#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rmtlab {

/// SplitMix64 output function (Steele, Lea, Flood). Bijective on 64-bit words.
constexpr std::uint64_t splitmix64_finalize(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Stateless derivation of a child seed from (parent, index).
constexpr std::uint64_t mix_seed(std::uint64_t parent, std::uint64_t index) noexcept
{
    constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ULL;
    return splitmix64_finalize(splitmix64_finalize(parent) + (index + 1) * golden);
}

/// Random stream owned by one consumer; all draws go through it.
class RandomStream {
public:
    using engine_type = std::mt19937_64;

    explicit RandomStream(std::uint64_t seed) : seed_(seed)
    {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(splitmix64_finalize(seed)),
                          static_cast<std::uint32_t>(splitmix64_finalize(seed) >> 32)};
        engine_.seed(seq);
    }

    std::uint64_t seed() const noexcept { return seed_; }

    RandomStream split(std::uint64_t index) const { return RandomStream(mix_seed(seed_, index)); }

    double normal() { return normal_(engine_); }

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }

    double exponential() { return exponential_(engine_); }

    double rademacher() { return (engine_() >> 63) ? 1.0 : -1.0; }

    engine_type& engine() noexcept { return engine_; }

private:
    std::uint64_t seed_;
    engine_type engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::exponential_distribution<double> exponential_{1.0};
};

} // namespace rmtlab
