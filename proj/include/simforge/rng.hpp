#pragma once

#include <cstdint>

namespace simforge {

// Deterministic 64-bit generator (splitmix64). Used everywhere the kernel
// needs randomness so that results are bit-identical across platforms and
// standard-library versions; std::uniform_real_distribution is not portable.
struct SplitMix64 {
    std::uint64_t state = 0;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1) with 53 bits of precision.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform integer in [low, high], inclusive.
    long long next_int(long long low, long long high) {
        const auto span = static_cast<std::uint64_t>(high - low) + 1ULL;
        return low + static_cast<long long>(next() % span);
    }
};

// Stable mix of a base seed and a stream index; gives independent,
// reproducible substreams (per-trial seeds, per-iteration seeds).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 g(seed ^ (0xD1B54A32D192ED03ULL * (index + 1)));
    return g.next();
}

}  // namespace simforge
