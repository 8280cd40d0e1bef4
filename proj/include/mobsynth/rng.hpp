#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

#include "mobsynth/common.hpp"

namespace mobsynth {

inline uint64_t splitmix64(uint64_t &state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent child seed from a base seed and a purpose tag.
/// Every random stream in the pipeline is obtained this way, so one config
/// seed pins the whole run.
inline uint64_t derive_seed(uint64_t base, std::string_view tag) {
    uint64_t s = base ^ fnv1a64(tag);
    return splitmix64(s);
}

inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t index) {
    uint64_t s = base ^ fnv1a64(tag) ^ (0x632be59bd9b4e019ULL * (index + 1));
    return splitmix64(s);
}

/// PCG32 generator. Self-contained so that sequences are identical across
/// platforms and standard-library versions (std:: distributions are not).
class Rng {
  public:
    explicit Rng(uint64_t seed, uint64_t stream = 0xda3e39cb94b95bdbULL)
        : state_(0), inc_((stream << 1) | 1) {
        next_u32();
        state_ += seed;
        next_u32();
    }

    uint32_t next_u32() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        auto xorshifted = static_cast<uint32_t>(((old >> 18) ^ old) >> 27);
        auto rot = static_cast<uint32_t>(old >> 59);
        return (xorshifted >> rot) | (xorshifted << ((32 - rot) & 31));
    }

    uint64_t next_u64() {
        uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform integer in [0, n). Debiased by rejection.
    uint32_t bounded(uint32_t n) {
        if (n <= 1) {
            return 0;
        }
        uint32_t threshold = (-n) % n;
        for (;;) {
            uint32_t r = next_u32();
            if (r >= threshold) {
                return r % n;
            }
        }
    }

    int uniform_int(int lo, int hi) { // inclusive bounds
        return lo + static_cast<int>(bounded(static_cast<uint32_t>(hi - lo + 1)));
    }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    double uniform01() {
        // 53-bit mantissa from two draws, in [0,1)
        uint64_t r = next_u64() >> 11;
        return static_cast<double>(r) * 0x1.0p-53;
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        // Box-Muller; two fresh draws per call keeps the stream position
        // a pure function of the call count.
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 1e-300) {
            u1 = 1e-300;
        }
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
    }

    double lognormal(double mu, double sigma) { return std::exp(normal(mu, sigma)); }

    /// Fisher-Yates.
    template <typename T> void shuffle(std::vector<T> &v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = bounded(static_cast<uint32_t>(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct indices from [0, n), in selection order.
    std::vector<size_t> sample_indices(size_t n, size_t k) {
        std::vector<size_t> idx(n);
        for (size_t i = 0; i < n; ++i) {
            idx[i] = i;
        }
        if (k > n) {
            k = n;
        }
        for (size_t i = 0; i < k; ++i) {
            size_t j = i + bounded(static_cast<uint32_t>(n - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

  private:
    uint64_t state_;
    uint64_t inc_;
};

} // namespace mobsynth
