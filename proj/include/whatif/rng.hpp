#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace whatif {

// Seeded, platform-stable PRNG (splitmix64 core). std:: distributions are
// implementation-defined, so all draws are derived from raw 64-bit output.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // decorrelate trivially related seeds
        next_u64();
        next_u64();
    }

    // Independent substream keyed by (seed, k1, k2). Drawing from one stream
    // never affects another; episode i regenerated alone equals episode i
    // from a full run.
    static Rng keyed(std::uint64_t seed, std::uint64_t k1, std::uint64_t k2 = 0) {
        std::uint64_t s = seed;
        s = mix_(s ^ (0x9e3779b97f4a7c15ULL + k1));
        s = mix_(s ^ (0xbf58476d1ce4e5b9ULL + k2));
        return Rng(s);
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix_(state_);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n); n > 0. Modulo bias is ~n/2^64, irrelevant at our ranges.
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    // inclusive range
    int uniform_int(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1))); }

    bool chance(double p) { return uniform() < p; }

    // Box-Muller, two fresh draws per call (no cached spare).
    double normal(double mu = 0.0, double sigma = 1.0) {
        double u = 1.0 - uniform();
        double v = uniform();
        double r = std::sqrt(-2.0 * std::log(u));
        return mu + sigma * r * std::cos(6.283185307179586 * v);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    template <class T>
    const T& pick(const std::vector<T>& v) {
        return v[static_cast<std::size_t>(below(v.size()))];
    }

private:
    static std::uint64_t mix_(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

}  // namespace whatif
