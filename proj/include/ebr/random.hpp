#pragma once

// Seeded randomness and hashing shared by every module.
//
// std::mt19937_64 output is fixed by the standard, but the std distributions
// are not, so all bounded/real/normal draws are derived here from raw engine
// output. This keeps shuffles, bags, initialisations and synthetic data
// identical across standard library implementations.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace ebr {

/// FNV-1a 64-bit. These constants are part of the feature-index contract.
inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

constexpr std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = kFnvOffset) noexcept {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

/// splitmix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a parent seed and a salt.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t salt) noexcept {
    return mix64(mix64(parent) ^ (salt * 0xD6E8FEB86659FD93ULL + 0x632BE59BD9B4E019ULL));
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::string_view salt) noexcept {
    return derive_seed(parent, fnv1a(salt));
}

/// Uniform double in [0, 1) from a 64-bit hash value.
constexpr double unit_from_bits(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return unit_from_bits(engine_()); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        // Lemire's multiply-shift with rejection.
        std::uint64_t x = engine_();
        unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                x = engine_();
                m = static_cast<unsigned __int128>(x) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(below(n)); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller (no cached second value).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

    /// k distinct values from [0, n) in draw order (partial Fisher-Yates).
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) {
            pool[i] = i;
        }
        if (k > n) {
            k = n;
        }
        for (std::size_t i = 0; i < k; ++i) {
            std::swap(pool[i], pool[i + index(n - i)]);
        }
        pool.resize(k);
        return pool;
    }

private:
    std::mt19937_64 engine_;
};

} // namespace ebr
