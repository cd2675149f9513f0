#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace osf {

// Splittable 64-bit generator built on the splitmix64 mixer. One root seed
// per run; named substreams ("data", "init", "shuffle", ...) derive
// independent streams so adding a consumer never perturbs the others.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    // [0, 1)
    double uniform() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased-enough for desk scale; n must be > 0.
    std::uint64_t next_below(std::uint64_t n) { return next() % n; }

    // Box-Muller without caching, so streams stay position-independent.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Exponential with mean 1 (gamma with shape 1).
    double exponential() {
        double u = uniform();
        if (u > 1.0 - 1e-16) u = 1.0 - 1e-16;
        return -std::log(1.0 - u);
    }

    SplitMix64 split(std::uint64_t salt) const {
        return SplitMix64(mix(state_ ^ mix(salt + 0x632be59bd9b4e019ULL)));
    }

    SplitMix64 split(std::string_view label) const {
        // FNV-1a over the label, then mixed into the parent state.
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : label) {
            h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
            h *= 0x100000001b3ULL;
        }
        return split(h);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

}  // namespace osf
