#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace provlm {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// xoshiro256** seeded via splitmix64. Self-contained so that corpora,
// instance mixes and sampling are byte-identical across platforms and
// standard library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& word : s_) {
            word = splitmix64(sm);
        }
    }

    uint64_t next_u64() {
        const uint64_t result = rotl_(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl_(s_[3], 45);
        return result;
    }

    // Unbiased integer in [0, n) by rejection.
    uint64_t uniform_u64(uint64_t n) {
        if (n <= 1) {
            return 0;
        }
        const uint64_t threshold = (0 - n) % n;
        for (;;) {
            const uint64_t r = next_u64();
            if (r >= threshold) {
                return r % n;
            }
        }
    }

    int uniform_int(int n) { return static_cast<int>(uniform_u64(static_cast<uint64_t>(n))); }

    // [0, 1) with 53 random bits.
    double uniform_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform_double() < p; }

    double normal(double mean = 0.0, double stddev = 1.0) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + spare_ * stddev;
        }
        // Box-Muller; u clamped away from 0 for log().
        const double u = 1.0 - uniform_double();
        const double v = uniform_double();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double theta = 2.0 * 3.14159265358979323846 * v;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return mean + r * std::cos(theta) * stddev;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = uniform_u64(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent child stream; fork(a) != fork(b) for a != b.
    Rng fork(uint64_t tag) const {
        uint64_t sm = s_[0] ^ (0xA0761D6478BD642FULL * (tag + 1));
        sm ^= s_[3];
        uint64_t mixed = splitmix64(sm);
        return Rng(mixed ^ (tag * 0xE7037ED1A0B428DBULL));
    }

private:
    static uint64_t rotl_(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t s_[4] = {};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace provlm
