#pragma once

#include <cstdint>

namespace layerlens {

// splitmix64: a 64-bit counter-based generator. The state advances by a fixed
// Weyl increment and each output mixes the counter, so a given seed produces
// the same stream on every platform and compiler. This single generator backs
// toy-weight synthesis, token sampling, k-means seeding and dataset
// subsampling, which keeps every experiment reproducible from one integer.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53 bits.
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [0, 1), 24 bits.
    float next_float() { return float(next_u64() >> 40) * 0x1.0p-24f; }

    // Uniform integer in [0, n). Plain modulo; the bias is irrelevant for the
    // ranges used here and the arithmetic stays portable.
    uint64_t next_below(uint64_t n) { return next_u64() % n; }

    uint64_t state() const { return state_; }

private:
    uint64_t state_;
};

}  // namespace layerlens
