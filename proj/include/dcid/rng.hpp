#pragma once

/**
 * @file rng.hpp
 * @brief Deterministic random engine with explicitly specified distributions.
 *
 * std::mt19937_64 output is fixed by the standard, but the std distribution
 * adapters are implementation-defined. Generation here uses explicit formulas
 * so streams are byte-identical across compilers and platforms.
 */

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace dcid {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Mix several stream identifiers into one sub-seed.
inline uint64_t mix_seed(uint64_t a, uint64_t b = 0, uint64_t c = 0, uint64_t d = 0) {
    uint64_t s = splitmix64(a);
    s = splitmix64(s ^ (b + 0x517cc1b727220a95ULL));
    s = splitmix64(s ^ (c + 0x2545f4914f6cdd1dULL));
    s = splitmix64(s ^ (d + 0x9e3779b97f4a7c15ULL));
    return s;
}

class RandomEngine {
public:
    explicit RandomEngine(uint64_t seed = 0) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n), n > 0 (rejection-free modulo of 64-bit draw
    /// is fine at these ranges).
    int64_t randint(int64_t n) { return static_cast<int64_t>(eng_() % static_cast<uint64_t>(n)); }

    /// Box-Muller; consumes two draws per pair, caches the second.
    double normal(double mu = 0.0, double sigma = 1.0) {
        if (has_spare_) {
            has_spare_ = false;
            return mu + sigma * spare_;
        }
        double u1 = uniform(), u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return mu + sigma * r * std::cos(a);
    }

    /// Serialize/restore full engine state (textual mt19937_64 stream plus
    /// the Box-Muller spare).
    std::string save_state() const;
    void load_state(const std::string& s);

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace dcid
