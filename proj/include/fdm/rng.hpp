#pragma once

// Counter-based splittable RNG. A stream is keyed by (seed, stream id); draws
// hash the key with an incrementing counter, so child streams derived via
// split() are independent of the parent's position and parallel fan-out does
// not change results.

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <numbers>
#include <vector>

namespace fdm {

namespace detail {
inline std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}
inline std::uint64_t mix2(std::uint64_t a, std::uint64_t b) {
    return mix64(mix64(a) ^ (b + 0x9E3779B97F4A7C15ull));
}
}  // namespace detail

class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(detail::mix2(seed, stream)) {}

    Rng split(std::uint64_t stream) const { return Rng(key_, stream + 1); }

    std::uint64_t next_u64() { return detail::mix2(key_, counter_++); }

    // [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive bounds
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        std::uint64_t span = std::uint64_t(hi - lo) + 1;
        return lo + std::int64_t(next_u64() % span);
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename Real>
    std::vector<Real> normal_vec(std::size_t n) {
        std::vector<Real> out(n);
        for (auto& v : out) v = static_cast<Real>(normal());
        return out;
    }

    // k distinct values from [0, n), ascending
    std::vector<int> sample_without_replacement(int n, int k) {
        std::vector<int> pool(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        for (int i = 0; i < k; ++i) {
            int j = int(uniform_int(i, n - 1));
            std::swap(pool[i], pool[j]);
        }
        std::vector<int> out(pool.begin(), pool.begin() + k);
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace fdm
