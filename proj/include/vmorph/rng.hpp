#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace vmorph {

/// Deterministic 64-bit generator (splitmix64). Used everywhere instead of
/// <random> distributions so that streams are bit-identical across compilers
/// and standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 bits of randomness.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller (no cached spare; keeps the stream
    /// position a pure function of the number of calls).
    double normal() {
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    bool coin() { return (next_u64() & 1u) != 0; }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Derive an independent stream from this seed and a stream id.
    /// Sub-streams let per-sample augmentation RNG depend only on
    /// (seed, sample id, epoch), not on iteration order.
    static Rng derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
        Rng mix(seed);
        std::uint64_t s = mix.next_u64();
        s ^= 0x517cc1b727220a95ULL * (a + 1);
        Rng mix2(s);
        return Rng(mix2.next_u64() ^ (0xd1b54a32d192ed03ULL * (b + 1)));
    }

private:
    std::uint64_t state_;
};

}  // namespace vmorph
