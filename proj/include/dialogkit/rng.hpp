#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace dialogkit {

// All randomness in the toolkit flows through this header so that runs are
// reproducible bit-for-bit from a seed, independent of platform or standard
// library version. std::uniform_int_distribution and friends are
// implementation-defined, so the draw algorithms are spelled out here.

/// SplitMix64 step. Used for seed derivation and cheap mixing.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a over bytes. Stable across platforms; used for id-keyed seed
/// derivation and file fingerprints.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Multiplicative string hash: h <- h * 31 + byte over the UTF-8 bytes,
/// 64-bit wraparound. Out-of-vocabulary tokens map to bucket
/// mult31(token) % bucket_count. Keep this exact algorithm: params files
/// written by one build must load identically in another.
inline std::uint64_t mult31(std::string_view s) {
    std::uint64_t h = 0;
    for (unsigned char c : s) h = h * 31ULL + c;
    return h;
}

/// xoshiro256** generator with fully specified draw helpers.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) {
            x = splitmix64(x);
            word = x;
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform integer in [0, n) by rejection (no modulo bias). n > 0.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller (polar form, cached spare).
    double next_gaussian();

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct indices from [0, n), uniform without replacement,
    /// in draw order. k <= n.
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4] = {};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace dialogkit
