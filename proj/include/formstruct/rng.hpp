#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace formstruct {

// Deterministic generator with pinned output semantics. The standard
// distributions are implementation-defined, so every draw used by the
// library goes through this class to keep datasets and training runs
// reproducible byte-for-byte.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    // splitmix64 core step.
    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform integer in [0, n), n > 0.
    uint64_t next_below(uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        uint64_t threshold = (0ull - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Uniform double in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    bool bernoulli(double p) { return next_double() < p; }

    // Box-Muller normal draw; one value per call, cached pair discarded to
    // keep the draw count independent of usage patterns.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 1e-300) u1 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derives an independent stream for a named purpose.
    Rng fork(uint64_t tag) {
        Rng child(state_ ^ (0xd1b54a32d192ed03ull * (tag + 1)));
        child.next_u64();
        return child;
    }

private:
    uint64_t state_;
};

}  // namespace formstruct
