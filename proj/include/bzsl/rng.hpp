#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace bzsl {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace detail

// Deterministic random stream. All distributions are implemented on top of
// the raw mt19937_64 output so results do not depend on the standard
// library's (unspecified) distribution algorithms.
//
// Child streams are derived by name so that independent pipeline stages
// (split, subsample, synth, ...) draw from decorrelated sequences that are
// stable under reordering and parallel execution.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(detail::splitmix64(seed)), seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    Rng child(std::string_view name) const {
        return Rng(detail::splitmix64(seed_ ^ detail::fnv1a(name)));
    }

    Rng child(std::string_view name, std::uint64_t index) const {
        return Rng(detail::splitmix64(seed_ ^ detail::fnv1a(name)) + index);
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t bound = n * (UINT64_MAX / n);
        std::uint64_t v = engine_();
        while (v >= bound) v = engine_();
        return v % n;
    }

    // Standard normal via Box-Muller (deterministic across platforms).
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Chi-squared with integer degrees of freedom (sum of squared normals).
    double chi_squared(int dof) {
        double s = 0.0;
        for (int i = 0; i < dof; ++i) {
            const double z = normal();
            s += z * z;
        }
        return s;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
        }
    }

    // k distinct indices drawn from [0, n), returned sorted.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        shuffle(idx);
        idx.resize(std::min(k, n));
        std::sort(idx.begin(), idx.end());
        return idx;
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace bzsl
