#ifndef VOXSEQ_RNG_HPP
#define VOXSEQ_RNG_HPP

#include <cmath>
#include <cstdint>

namespace voxseq {

// Counter-based generator: every draw is a pure function of (seed, counter),
// so streams can be replayed or split without shared state.
inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t random_bits(uint64_t seed, uint64_t counter) {
    return mix64(seed ^ mix64(counter));
}

class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed) {}

    uint64_t bits() { return random_bits(seed_, counter_++); }

    // Uniform in [0, 1), 53-bit mantissa.
    double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n > 0. Multiply-shift, no rejection loop.
    uint64_t below(uint64_t n) {
        return static_cast<uint64_t>((static_cast<__uint128_t>(bits()) * n) >> 64);
    }

    // Box-Muller; consumes two counters per draw.
    double normal() {
        double u1 = static_cast<double>((bits() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        double u2 = static_cast<double>(bits() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // Independent substream; deterministic in (seed, tag).
    Rng fork(uint64_t tag) const { return Rng(mix64(seed_ ^ mix64(~tag))); }

    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_;
    uint64_t counter_ = 0;
};

}  // namespace voxseq

#endif
