#pragma once

#include <cstdint>

namespace overflowlab {

// SplitMix64 (Steele, Lea, Flood 2014).  Small state, passes BigCrush, and
// jumping to an arbitrary stream is O(1), which is what makes the estimator
// reproducible independent of thread count: replication k always draws from
// derive_stream(seed, k) no matter which worker runs it.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform on [0,1) with 53 random bits, so every double in the dyadic
    // grid is reachable and 1.0 is not.
    double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

// Decorrelates streams by running the seed itself through one SplitMix64
// scramble per stream index.  stream 0 is distinct from the raw seed.
inline SplitMix64 derive_stream(std::uint64_t master_seed, std::uint64_t stream) {
    std::uint64_t z = master_seed + (stream + 1) * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return SplitMix64(z);
}

}  // namespace overflowlab
