#pragma once

#include <cmath>
#include <cstdint>

namespace camo {

// SplitMix64. All randomness in the project flows through this so that runs
// are reproducible from a single seed and integer-only paths (datagen) stay
// bit-identical across platforms.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1). 53 mantissa bits.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller. Fine for weight init; not used in the datagen raster path.
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Derive an independent stream for a tagged sub-purpose.
    Rng fork(uint64_t tag) const {
        Rng r(state_ ^ (0x632be59bd9b4e019ULL * (tag + 1)));
        r.next_u64();
        return r;
    }

private:
    uint64_t state_;
};

// Stateless integer hash for lattice noise: hash(seed, x, y) -> [0,1).
// Uses only integer ops, so the synthetic data raster is platform-exact.
inline double hash01(uint64_t seed, int64_t x, int64_t y) {
    uint64_t h = seed;
    h ^= uint64_t(x) * 0x9e3779b97f4a7c15ULL;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h ^= uint64_t(y) * 0xc2b2ae3d27d4eb4fULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return double(h >> 11) * 0x1.0p-53;
}

}  // namespace camo
