#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

namespace omnicodec {

inline uint64_t splitmix64(uint64_t & x) {
    x += 0x9e3779b97f4a7c15ull;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// xoshiro256**: 4x u64 state, trivially serializable, identical across platforms
class rng {
  public:
    rng() : rng(0) {}

    explicit rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto & w : s_) w = splitmix64(x);
        has_gauss_ = false;
        gauss_ = 0.0;
    }

    // independent substream (e.g. per tensor name), order-insensitive
    static rng from_seed_and_tag(uint64_t seed, const std::string & tag) {
        uint64_t h = 0xcbf29ce484222325ull; // fnv-1a 64
        for (unsigned char c : tag) { h ^= c; h *= 0x100000001b3ull; }
        return rng(seed ^ h);
    }

    uint64_t next_u64() {
        auto rotl = [](uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform in [0, 1)
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [lo, hi] inclusive
    int64_t next_int(int64_t lo, int64_t hi) {
        uint64_t span = uint64_t(hi - lo) + 1;
        return lo + int64_t(next_u64() % span);
    }

    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // box-muller, one cached value
    double next_gauss() {
        if (has_gauss_) { has_gauss_ = false; return gauss_; }
        double u1 = 0.0;
        do { u1 = next_double(); } while (u1 <= 0.0);
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        gauss_ = r * std::sin(a);
        has_gauss_ = true;
        return r * std::cos(a);
    }

    std::array<uint64_t, 6> save() const {
        return {s_[0], s_[1], s_[2], s_[3], has_gauss_ ? 1ull : 0ull,
                *reinterpret_cast<const uint64_t *>(&gauss_)};
    }

    void load(const std::array<uint64_t, 6> & st) {
        for (int i = 0; i < 4; ++i) s_[i] = st[i];
        has_gauss_ = st[4] != 0;
        gauss_ = *reinterpret_cast<const double *>(&st[5]);
    }

  private:
    std::array<uint64_t, 4> s_{};
    bool has_gauss_ = false;
    double gauss_ = 0.0;
};

} // namespace omnicodec
