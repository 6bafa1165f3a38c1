#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace ctadapt {

/// Seeded generator whose derived draws are identical on every standard
/// library. Only the raw mt19937_64 stream is used; the <random>
/// distributions are implementation-defined and are avoided on purpose.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    /// Uniform integer in [lo, hi], inclusive.
    int between(int lo, int hi);

    /// Standard normal draw (Box-Muller, no cached second value).
    double normal();

    /// Textual engine state in the format mandated for mt19937_64 streams.
    std::string state() const;
    static Rng from_state(const std::string& state);

private:
    std::mt19937_64 engine_;
};

/// SplitMix64 mix of (seed, stream) used to derive independent sub-seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace ctadapt
