#pragma once

// Test-support statistics: chi-squared p-values for comparing empirical
// distributions against oracles. Test code only.

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace test_stats {

// Regularized upper incomplete gamma Q(a, x) via series / continued fraction.
inline double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q: bad arguments");
    if (x == 0.0) return 1.0;
    double gln = std::lgamma(a);
    if (x < a + 1.0) {
        // lower series, return 1 - P
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-15) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
    }
    // continued fraction for Q
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - gln) * h;
}

inline double chi2_sf(double stat, int dof) { return gamma_q(double(dof) / 2.0, stat / 2.0); }

// Two-sample chi-squared homogeneity test over matching category counts.
// Cells with small combined counts are pooled. Returns the p-value.
template <typename Key>
double chi2_two_sample_p(const std::map<Key, long>& a, const std::map<Key, long>& b,
                         long pool_below = 10) {
    double na = 0, nb = 0;
    std::map<Key, std::pair<long, long>> cells;
    for (const auto& [k, c] : a) {
        cells[k].first = c;
        na += double(c);
    }
    for (const auto& [k, c] : b) {
        cells[k].second = c;
        nb += double(c);
    }
    std::vector<std::pair<double, double>> merged;
    double pool_a = 0, pool_b = 0;
    for (const auto& [k, c] : cells) {
        if (c.first + c.second < pool_below) {
            pool_a += double(c.first);
            pool_b += double(c.second);
        } else {
            merged.emplace_back(double(c.first), double(c.second));
        }
    }
    if (pool_a + pool_b > 0) merged.emplace_back(pool_a, pool_b);
    if (merged.size() < 2) throw std::invalid_argument("chi2: too few cells");

    // standard two-sample statistic with scaling constants for unequal sizes
    double k1 = std::sqrt(nb / na), k2 = std::sqrt(na / nb);
    double stat = 0.0;
    for (const auto& [ca, cb] : merged) {
        double denom = ca + cb;
        double num = k1 * ca - k2 * cb;
        stat += num * num / denom;
    }
    return chi2_sf(stat, int(merged.size()) - 1);
}

// Goodness-of-fit against expected counts. Returns the p-value.
inline double chi2_gof_p(const std::vector<long>& observed, const std::vector<double>& expected) {
    if (observed.size() != expected.size() || observed.size() < 2)
        throw std::invalid_argument("chi2_gof: bad inputs");
    double stat = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (expected[i] <= 0) throw std::invalid_argument("chi2_gof: nonpositive expectation");
        double d = double(observed[i]) - expected[i];
        stat += d * d / expected[i];
    }
    return chi2_sf(stat, int(observed.size()) - 1);
}

}  // namespace test_stats
