#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

namespace fan {

// Counter-based deterministic generator. Streams are keyed by a root seed
// plus stable labels/indices, so results do not depend on call order
// between independent consumers.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ull) {}

    uint64_t next_u64() {
        // splitmix64
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in [lo,hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    uint64_t next_below(uint64_t n) { return next_u64() % n; }

    double normal() {
        // Box-Muller; one value per call, cache the second
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 1e-300) u1 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // truncated normal in [-2σ, 2σ], rejection sampled
    double trunc_normal(double stddev) {
        double v = normal() * stddev;
        while (std::fabs(v) > 2.0 * stddev) v = normal() * stddev;
        return v;
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Stable seed derivation: hash the root seed with a label and optional
// indices (FNV-1a over the label, mixed with splitmix64).
inline uint64_t derive_seed(uint64_t root, std::string_view label,
                            uint64_t a = 0, uint64_t b = 0, uint64_t c = 0) {
    uint64_t h = 0xcbf29ce484222325ull ^ root;
    for (char ch : label) {
        h ^= static_cast<uint8_t>(ch);
        h *= 0x100000001b3ull;
    }
    auto mix = [](uint64_t x) {
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    };
    h = mix(h + 0x9e3779b97f4a7c15ull * (a + 1));
    h = mix(h + 0x9e3779b97f4a7c15ull * (b + 1));
    h = mix(h + 0x9e3779b97f4a7c15ull * (c + 1));
    return h;
}

} // namespace fan
