#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "cdslab/types.hpp"

namespace cdslab {

/// Seed for the substream `label` of a run seeded with `seed`. Labels hash
/// independently, so adding a new consumer never shifts an existing stream.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view label);

/// FNV-1a over raw bytes; used for config hashes and the fixed-noise fingerprint.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Caller-owned random stream. Normal draws use the Marsaglia polar method on
/// top of mt19937_64 so sequences are identical across standard libraries.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    static RandomStream derive(std::uint64_t seed, std::string_view label) {
        return RandomStream(substream_seed(seed, label));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi); returns lo exactly when lo == hi.
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal();

    Vector normal_vector(Index n);

    /// Uniform index in [0, n).
    std::size_t index(std::size_t n);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace cdslab
