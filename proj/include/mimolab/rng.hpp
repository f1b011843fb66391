#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mimolab {

// Deterministic 64-bit-seeded generator. All randomness in the library goes
// through this class so that (seed, arguments) fully determine every sample.
// Independent streams for parallel or per-sample work are derived with
// Rng::stream(seed, index); the derivation mixes the index through splitmix64
// so nearby indices give uncorrelated streams.
class Rng {
  public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static Rng stream(uint64_t seed, uint64_t index) {
        return Rng(mix(seed ^ mix(index)));
    }

    // Uniform on [0, 1). 53-bit resolution.
    double uniform() {
        return double(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer on [0, n). Rejection sampling keeps it unbiased.
    uint64_t uniform_int(uint64_t n) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    // Standard normal via Box-Muller; pinned here rather than relying on
    // std::normal_distribution, whose output is implementation-defined.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace mimolab
