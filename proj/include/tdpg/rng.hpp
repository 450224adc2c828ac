#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "tdpg/error.hpp"

namespace tdpg {

// Deterministic random stream. The engine (mt19937_64) is fully specified by
// the standard; the value transforms below are hand-rolled so that draw
// sequences are identical across standard library implementations.
//
// Streams form a tree: child(a, b) derives an independent stream from the
// root seed plus two labels, without consuming state from the parent. Every
// rollout, MINE run, and shuffle gets its own stream, which makes results
// independent of execution order and thread count.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : root_seed_(seed), engine_(mix(seed, 0x9e3779b97f4a7c15ull)) {}

    std::uint64_t root_seed() const { return root_seed_; }

    Rng child(std::uint64_t a, std::uint64_t b = 0) const {
        return Rng(mix(mix(root_seed_, a + 0x1ull), b + 0x2ull));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1). 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via Box-Muller; the second value of each pair is cached.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        // Avoid log(0).
        while (u1 <= 0.0) u1 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform index in [0, n).
    std::size_t index(std::size_t n) {
        require(n > 0, "Rng::index: n must be positive");
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return static_cast<std::size_t>(v % n);
    }

private:
    static std::uint64_t mix(std::uint64_t z, std::uint64_t salt) {
        // splitmix64 finalizer over seed xor salt.
        z ^= salt * 0xbf58476d1ce4e5b9ull;
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t root_seed_;
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

// Stream labels used to derive child streams from a run's master seed.
namespace stream {
constexpr std::uint64_t kInit = 0x10;
constexpr std::uint64_t kRollout = 0x20;
constexpr std::uint64_t kMine = 0x30;
constexpr std::uint64_t kShuffle = 0x40;
constexpr std::uint64_t kEval = 0x50;
}  // namespace stream

}  // namespace tdpg
