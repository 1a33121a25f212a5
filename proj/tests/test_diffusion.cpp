#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "fdm/diffusion.hpp"
#include "fdm/rng.hpp"
#include "fdm/schedule.hpp"

using namespace fdm;

namespace {

template <typename Real>
Tensor<Real> random_frames(std::size_t n, std::size_t dim, Rng& rng) {
    Tensor<Real> t = Tensor<Real>::zeros({n, dim});
    for (auto& v : t.values) v = Real(rng.normal());
    return t;
}

// stub denoisers
template <typename Real>
DenoiserFn<Real> zero_denoiser() {
    return [](const Tensor<Real>& x_t, const Tensor<Real>&, int, const std::vector<int>&,
              const std::vector<int>&) { return Tensor<Real>::zeros(x_t.shape); };
}

}  // namespace

TEST_CASE("make_schedule") {
    SECTION("default range drives alpha_bar below 1e-4 by T=1000") {
        auto s = make_schedule(1000, 1e-4, 0.02);
        // frozen from a direct product computation over the linear betas
        double prod = 1.0;
        for (int t = 1; t <= 1000; ++t)
            prod *= 1.0 - (1e-4 + (0.02 - 1e-4) * double(t - 1) / 999.0);
        CHECK(s.alpha_bar_at(1000) == Approx(prod).epsilon(1e-12));
        CHECK(s.alpha_bar_at(1000) < 1e-4);
    }
    SECTION("single step") {
        auto s = make_schedule(1, 0.5, 0.5);
        CHECK(s.alpha_bar_at(1) == Approx(0.5));
        CHECK(s.alpha_at(1) == Approx(0.5));
        CHECK(s.sigma_at(1) == Approx(std::sqrt(0.5)));
    }
    SECTION("alpha_bar strictly decreasing") {
        auto s = make_schedule(64, 5e-3, 0.1);
        for (int t = 2; t <= 64; ++t) CHECK(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));
        for (int t = 1; t <= 64; ++t) {
            CHECK(s.alpha_at(t) > 0.0);
            CHECK(s.alpha_at(t) < 1.0);
            CHECK(s.sigma_at(t) >= 0.0);
        }
    }
    SECTION("invalid ranges rejected") {
        REQUIRE_THROWS_AS(make_schedule(0, 1e-4, 0.02), ValidationError);
        REQUIRE_THROWS_AS(make_schedule(10, 0.0, 0.02), ValidationError);
        REQUIRE_THROWS_AS(make_schedule(10, 0.3, 0.2), ValidationError);
        REQUIRE_THROWS_AS(make_schedule(10, 0.5, 1.0), ValidationError);
    }
}

TEST_CASE("forward_step") {
    Rng rng(1);
    auto x = random_frames<double>(2, 3, rng);
    SECTION("zero noise scales by sqrt(alpha_t)") {
        auto s = make_schedule(4, 0.19, 0.19);
        auto eps = Tensor<double>::zeros(x.shape);
        auto out = forward_step(s, x, 2, eps);
        for (std::size_t i = 0; i < x.numel(); ++i)
            CHECK(out.values[i] == Approx(std::sqrt(0.81) * x.values[i]));
    }
    SECTION("alpha near one leaves input nearly unchanged") {
        auto s = make_schedule(1, 1e-12, 1e-12);
        Rng r2(2);
        auto out = forward_step(s, x, 1, r2);
        for (std::size_t i = 0; i < x.numel(); ++i)
            CHECK(out.values[i] == Approx(x.values[i]).margin(1e-5));
    }
    SECTION("t out of range") {
        auto s = make_schedule(4);
        Rng r3(3);
        REQUIRE_THROWS_AS(forward_step(s, x, 0, r3), ValidationError);
        REQUIRE_THROWS_AS(forward_step(s, x, 5, r3), ValidationError);
    }
}

TEST_CASE("forward_marginal") {
    Rng rng(4);
    auto x0 = random_frames<double>(2, 4, rng);
    auto s = make_schedule(16, 1e-3, 0.3);
    SECTION("eps = 0 scales by sqrt(alpha_bar)") {
        auto out = forward_marginal(s, x0, 9, Tensor<double>::zeros(x0.shape));
        double a = std::sqrt(s.alpha_bar_at(9));
        for (std::size_t i = 0; i < x0.numel(); ++i) CHECK(out.values[i] == Approx(a * x0.values[i]));
    }
    SECTION("x0 = 0 with unit-norm eps gives norm sqrt(1-alpha_bar)") {
        Tensor<double> zero = Tensor<double>::zeros({1, 4});
        Tensor<double> eps({1, 4}, {1.0, 0.0, 0.0, 0.0});
        auto out = forward_marginal(s, zero, 12, eps);
        double norm = 0;
        for (double v : out.values) norm += v * v;
        CHECK(std::sqrt(norm) == Approx(std::sqrt(1.0 - s.alpha_bar_at(12))));
    }
    SECTION("shape mismatch rejected") {
        REQUIRE_THROWS_AS(forward_marginal(s, x0, 3, Tensor<double>::zeros({1, 4})),
                          ValidationError);
    }
}

TEST_CASE("iterated forward steps reproduce the closed-form marginal") {
    // Monte-Carlo oracle: empirical mean and variance across chains vs the
    // closed form, within 4 standard errors.
    const int T = 10, runs = 20000;
    auto s = make_schedule(T, 0.01, 0.2);
    Tensor<double> x0({1, 2}, {1.5, -0.75});
    Rng rng(5);

    std::vector<double> sum(2, 0.0), sumsq(2, 0.0);
    for (int r = 0; r < runs; ++r) {
        Tensor<double> x = x0;
        for (int t = 1; t <= T; ++t) x = forward_step(s, x, t, rng);
        for (int c = 0; c < 2; ++c) {
            sum[std::size_t(c)] += x.values[std::size_t(c)];
            sumsq[std::size_t(c)] += x.values[std::size_t(c)] * x.values[std::size_t(c)];
        }
    }
    double ab = s.alpha_bar_at(T);
    for (int c = 0; c < 2; ++c) {
        double mean = sum[std::size_t(c)] / runs;
        double var = sumsq[std::size_t(c)] / runs - mean * mean;
        double want_mean = std::sqrt(ab) * x0.values[std::size_t(c)];
        double want_var = 1.0 - ab;
        double se_mean = std::sqrt(want_var / runs);
        double se_var = want_var * std::sqrt(2.0 / (runs - 1));
        CHECK(std::abs(mean - want_mean) <= 4.0 * se_mean);
        CHECK(std::abs(var - want_var) <= 4.0 * se_var);
    }
}

TEST_CASE("denoising_loss") {
    auto s = make_schedule(8, 0.01, 0.1);
    Rng rng(6);
    auto x0 = random_frames<double>(2, 3, rng);
    auto y = random_frames<double>(1, 3, rng);
    std::vector<int> X = {5, 6}, Y = {2};

    SECTION("perfect denoiser gives zero loss") {
        DenoiserFn<double> perfect = [&](const Tensor<double>&, const Tensor<double>&, int,
                                         const std::vector<int>&, const std::vector<int>&) {
            return random_frames<double>(0, 0, rng);  // replaced below
        };
        auto eps = random_frames<double>(2, 3, rng);
        perfect = [eps](const Tensor<double>&, const Tensor<double>&, int,
                        const std::vector<int>&, const std::vector<int>&) { return eps; };
        CHECK(denoising_loss(perfect, s, x0, y, X, Y, 3, eps) == 0.0);
    }
    SECTION("zero denoiser expects |X| * frame_dim") {
        // Monte-Carlo oracle over eps: E||eps||^2 = |X| * frame_dim
        const int runs = 4000;
        double total = 0.0;
        std::vector<double> losses;
        for (int r = 0; r < runs; ++r) {
            auto eps = random_frames<double>(2, 3, rng);
            double l = denoising_loss(zero_denoiser<double>(), s, x0, y, X, Y, 4, eps);
            losses.push_back(l);
            total += l;
        }
        double mean = total / runs;
        double var = 0.0;
        for (double l : losses) var += (l - mean) * (l - mean);
        var /= (runs - 1);
        double se = std::sqrt(var / runs);
        CHECK(std::abs(mean - 6.0) <= 3.0 * se);
    }
    SECTION("loss invariant under joint permutation of X and x0 rows") {
        auto eps = random_frames<double>(2, 3, rng);
        double base = denoising_loss(zero_denoiser<double>(), s, x0, y, X, Y, 4, eps);
        Tensor<double> x0p = Tensor<double>::zeros(x0.shape);
        Tensor<double> epsp = Tensor<double>::zeros(eps.shape);
        for (int c = 0; c < 3; ++c) {
            x0p.at(0, std::size_t(c)) = x0.at(1, std::size_t(c));
            x0p.at(1, std::size_t(c)) = x0.at(0, std::size_t(c));
            epsp.at(0, std::size_t(c)) = eps.at(1, std::size_t(c));
            epsp.at(1, std::size_t(c)) = eps.at(0, std::size_t(c));
        }
        double perm = denoising_loss(zero_denoiser<double>(), s, x0p, y, {6, 5}, Y, 4, epsp);
        CHECK(perm == Approx(base).margin(1e-12));
    }
    SECTION("index overlap and empty X rejected") {
        auto eps = random_frames<double>(2, 3, rng);
        REQUIRE_THROWS_AS(denoising_loss(zero_denoiser<double>(), s, x0, y, {2, 6}, Y, 3, eps),
                          ValidationError);
        Tensor<double> empty;
        REQUIRE_THROWS_AS(denoising_loss(zero_denoiser<double>(), s, empty, y, {}, Y, 3, eps),
                          ValidationError);
    }
    SECTION("no hidden weighting: equal alpha_bar means equal loss across schedules") {
        // schedule A at t=2 and schedule B at t=1 share alpha_bar = 0.72
        auto sa = make_schedule(2, 0.1, 0.2);  // alpha_bar_2 = 0.9 * 0.8 = 0.72
        auto sb = make_schedule(1, 0.28, 0.28);
        auto eps = random_frames<double>(2, 3, rng);
        double la = denoising_loss(zero_denoiser<double>(), sa, x0, y, X, Y, 2, eps);
        double lb = denoising_loss(zero_denoiser<double>(), sb, x0, y, X, Y, 1, eps);
        CHECK(la == Approx(lb).margin(1e-12));
    }
}

TEST_CASE("reverse_step") {
    auto s = make_schedule(6, 0.05, 0.3);
    Rng rng(7);
    auto x_t = random_frames<double>(2, 3, rng);
    Tensor<double> y;

    SECTION("zero-denoiser, t=1 (no noise): x / sqrt(alpha_t)") {
        Rng r(8);
        auto out = reverse_step(zero_denoiser<double>(), s, x_t, y, 1, {0, 1}, {}, r);
        for (std::size_t i = 0; i < x_t.numel(); ++i)
            CHECK(out.values[i] == Approx(x_t.values[i] / std::sqrt(s.alpha_at(1))));
    }
    SECTION("same seed is bit-identical") {
        Rng r1(9), r2(9);
        auto a = reverse_step(zero_denoiser<double>(), s, x_t, y, 4, {0, 1}, {}, r1);
        auto b = reverse_step(zero_denoiser<double>(), s, x_t, y, 4, {0, 1}, {}, r2);
        REQUIRE(a.values == b.values);
    }
    SECTION("one-step inversion: oracle denoiser recovers x0 exactly at T=1") {
        auto s1 = make_schedule(1, 0.36, 0.36);
        Rng r(10);
        auto x0 = random_frames<double>(2, 3, r);
        auto eps = random_frames<double>(2, 3, r);
        auto x1 = forward_marginal(s1, x0, 1, eps);
        double ab = s1.alpha_bar_at(1);
        DenoiserFn<double> oracle = [x0, ab](const Tensor<double>& xt, const Tensor<double>&, int,
                                             const std::vector<int>&, const std::vector<int>&) {
            Tensor<double> out = xt;
            for (std::size_t i = 0; i < out.numel(); ++i)
                out.values[i] = (xt.values[i] - std::sqrt(ab) * x0.values[i]) / std::sqrt(1.0 - ab);
            return out;
        };
        auto recovered = reverse_step(oracle, s1, x1, y, 1, {0, 1}, {}, r);
        for (std::size_t i = 0; i < x0.numel(); ++i)
            CHECK(recovered.values[i] == Approx(x0.values[i]).margin(1e-12));
    }
    SECTION("t out of range") {
        Rng r(11);
        REQUIRE_THROWS_AS(reverse_step(zero_denoiser<double>(), s, x_t, y, 0, {0, 1}, {}, r),
                          ValidationError);
    }
}

TEST_CASE("ddpm_sample") {
    auto s = make_schedule(5, 0.01, 0.2);
    Tensor<double> y;

    SECTION("output shape (|X|, frame_dim)") {
        Rng r(12);
        auto x = ddpm_sample(zero_denoiser<double>(), s, 4, y, {3, 5, 9}, {}, r);
        REQUIRE(x.shape == Shape{3, 4});
    }
    SECTION("unconditional sampling runs with empty Y") {
        Rng r(13);
        auto x = ddpm_sample(zero_denoiser<double>(), s, 2, y, {0}, {}, r);
        REQUIRE(x.shape == Shape{1, 2});
        REQUIRE(x.all_finite());
    }
    SECTION("seeded reproducibility") {
        Rng r1(7), r2(7);
        auto a = ddpm_sample(zero_denoiser<double>(), s, 3, y, {1, 2}, {}, r1);
        auto b = ddpm_sample(zero_denoiser<double>(), s, 3, y, {1, 2}, {}, r2);
        REQUIRE(a.values == b.values);
    }
}
