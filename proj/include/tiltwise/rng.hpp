#ifndef TILTWISE_RNG_HPP
#define TILTWISE_RNG_HPP

#include <cstdint>
#include <span>

namespace tiltwise {

// SplitMix64 (Steele, Lea & Flood). Used everywhere randomness is needed:
// dataset simulation, bootstrap resampling, forest bagging. Substreams are
// derived by finalizer-mixing a (seed, index, purpose) triple, so replicate
// and per-row streams are independent of execution order.
struct SplitMix64 {
    std::uint64_t state = 0;

    explicit SplitMix64(std::uint64_t s) : state(s) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1) using the top 53 bits.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return next_double() < p; }

    // Unbiased-enough bounded draw via 128-bit multiply (bias < bound / 2^64).
    std::uint64_t bounded(std::uint64_t bound) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * bound) >> 64);
    }

    // Index into a discrete distribution given cumulative probabilities
    // (last entry treated as 1).
    std::size_t categorical(std::span<const double> cumulative) {
        double u = next_double();
        for (std::size_t k = 0; k + 1 < cumulative.size(); ++k) {
            if (u < cumulative[k]) return k;
        }
        return cumulative.empty() ? 0 : cumulative.size() - 1;
    }
};

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Deterministic substream for (seed, index) pairs; `purpose` separates
// independent uses of the same seed (row generation, probes, bootstrap, ...).
inline SplitMix64 substream(std::uint64_t seed, std::uint64_t index,
                            std::uint64_t purpose = 0) {
    return SplitMix64(mix64(seed + 0x9E3779B97F4A7C15ULL) ^
                      mix64(index + 0xD1B54A32D192ED03ULL) ^
                      mix64(purpose + 0x8CB92BA72F3D8DD7ULL));
}

namespace rng_purpose {
constexpr std::uint64_t dataset_row = 1;
constexpr std::uint64_t probe_row = 2;
constexpr std::uint64_t bootstrap = 3;
constexpr std::uint64_t forest_tree = 4;
}  // namespace rng_purpose

}  // namespace tiltwise

#endif
