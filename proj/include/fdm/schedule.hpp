#pragma once

// Diffusion noise schedule: per-step retention factors alpha_t, their running
// product alpha_bar_t, and the fixed reverse-step noise scale sigma_t.
// Index t runs 1..T; accessors take t in that range.

#include <cmath>
#include <string>
#include <vector>

#include "fdm/tensor.hpp"

namespace fdm {

struct NoiseSchedule {
    int T = 0;
    std::vector<double> alpha;      // alpha[t-1] for t = 1..T
    std::vector<double> alpha_bar;  // cumulative product, strictly decreasing
    std::vector<double> sigma;      // fixed function of t, not learned

    double alpha_at(int t) const {
        check(t);
        return alpha[std::size_t(t) - 1];
    }
    double alpha_bar_at(int t) const {
        check(t);
        return alpha_bar[std::size_t(t) - 1];
    }
    double sigma_at(int t) const {
        check(t);
        return sigma[std::size_t(t) - 1];
    }

    void check(int t) const {
        if (t < 1 || t > T)
            throw ValidationError("schedule: timestep " + std::to_string(t) + " outside 1.." +
                                  std::to_string(T));
    }
};

// Linear beta schedule: beta_t interpolates beta_start..beta_end, alpha_t = 1 - beta_t,
// sigma_t = sqrt(beta_t).
inline NoiseSchedule make_schedule(int T, double beta_start = 1e-4, double beta_end = 0.02) {
    if (T < 1) throw ValidationError("make_schedule: T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw ValidationError("make_schedule: need 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.T = T;
    s.alpha.resize(std::size_t(T));
    s.alpha_bar.resize(std::size_t(T));
    s.sigma.resize(std::size_t(T));
    double prod = 1.0;
    for (int t = 1; t <= T; ++t) {
        double frac = (T == 1) ? 0.0 : double(t - 1) / double(T - 1);
        double beta = beta_start + (beta_end - beta_start) * frac;
        double a = 1.0 - beta;
        prod *= a;
        s.alpha[std::size_t(t) - 1] = a;
        s.alpha_bar[std::size_t(t) - 1] = prod;
        s.sigma[std::size_t(t) - 1] = std::sqrt(beta);
    }
    return s;
}

}  // namespace fdm
