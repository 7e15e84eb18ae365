#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <algorithm>

namespace pmfvb {

/// Named substreams. Every random consumer draws from its own stream so that
/// adding or removing draws in one place never shifts another.
enum class Stream : std::uint64_t {
    model = 1,        // loading and factor entries of a synthetic model
    hidden = 2,       // latent component of each synthetic sample
    categorical = 3,  // observed categories given the component
    outage = 4,       // missingness mask
    init = 5,         // variational initialisation
    minibatch = 6,    // SVI sample indices
    holdout = 7,      // held-out column selection
    split = 8,        // train/validation/test assignment
    hide = 9,         // hide-one evaluation position
};

/// Seeded generator for one (seed, stream) pair. Copying an Rng copies its
/// position, so a copy replays the same sequence.
class Rng {
public:
    Rng(std::uint64_t seed, Stream stream, std::uint64_t substream = 0) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream),
                          static_cast<std::uint32_t>(substream),
                          static_cast<std::uint32_t>(substream >> 32)};
        engine_.seed(seq);
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Lemire's rejection keeps it unbiased.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t x = engine_();
            const u128 m = static_cast<u128>(x) * n;
            if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
        }
    }

    /// Index drawn from a cumulative distribution whose last entry is the total mass.
    std::size_t categorical(std::span<const double> cdf) {
        const double u = uniform() * cdf.back();
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
    }

private:
    __extension__ using u128 = unsigned __int128;

    std::mt19937_64 engine_;
};

}  // namespace pmfvb
