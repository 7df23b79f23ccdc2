#pragma once

#include <cstdint>
#include <random>

namespace hilsim {

/// Seeded noise generator with a fully specified output sequence.
///
/// The standard distributions are implementation-defined, so the conversion from
/// the 64-bit engine output is done here: uniform draws take the top 53 bits and
/// Gaussian draws use the Box-Muller transform. Identical seeds give bit-identical
/// sequences on every conforming platform.
class NoiseSource {
public:
    explicit NoiseSource(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform01();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    /// Standard normal.
    double gaussian();

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace hilsim
