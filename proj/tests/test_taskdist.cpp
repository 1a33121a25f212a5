#include <catch2/catch.hpp>

#include <map>
#include <set>
#include <vector>

#include "fdm/rng.hpp"
#include "fdm/taskdist.hpp"
#include "support/stats.hpp"

using namespace fdm;

namespace {

// Independent straight-line transcription of the structured group algorithm,
// kept deliberately separate from the library implementation.
TaskSample oracle_structured(int n, int k, Rng& rng) {
    std::set<int> X, Y;
    for (;;) {
        long n_group = rng.uniform_int(1, k);
        double hi = double(n - 1) / double(n_group);
        if (hi < 1.0) hi = 1.0;
        double s = std::exp(rng.uniform(std::log(1.0), std::log(hi)));
        double x = rng.uniform(0.0, double(n) - double(n_group - 1) * s);
        bool obs = rng.uniform() < 0.5;
        std::set<int> G;
        for (long i = 0; i < n_group; ++i) {
            int idx = int(std::floor(x + s * double(i)));
            if (idx > n - 1) idx = n - 1;
            if (X.count(idx) == 0 && Y.count(idx) == 0) G.insert(idx);
        }
        if (X.size() + Y.size() + G.size() > std::size_t(k)) break;
        if (X.empty() || !obs)
            X.insert(G.begin(), G.end());
        else
            Y.insert(G.begin(), G.end());
        if (int(X.size() + Y.size()) == n) break;
    }
    TaskSample t;
    t.n_frames = n;
    t.latents.assign(X.begin(), X.end());
    t.observed.assign(Y.begin(), Y.end());
    return t;
}

}  // namespace

TEST_CASE("all three distributions emit valid samples over many draws") {
    const int draws = 100000;
    Rng rng(11);
    SECTION("structured at N=30, K=10") {
        for (int i = 0; i < draws; ++i) {
            auto t = sample_task_structured(30, 10, rng);
            REQUIRE_NOTHROW(check_task_sample(t, 10));
        }
    }
    SECTION("uniform at N=30, K=10") {
        for (int i = 0; i < draws; ++i) {
            auto t = sample_task_uniform(30, 10, rng);
            REQUIRE_NOTHROW(check_task_sample(t, 10));
        }
    }
    SECTION("single at N=100") {
        for (int i = 0; i < draws; ++i) {
            auto t = sample_task_single(100, rng);
            REQUIRE_NOTHROW(check_task_sample(t, 20));
        }
    }
}

TEST_CASE("structured distribution") {
    Rng rng(21);
    SECTION("K=1 always yields a single latent and empty Y") {
        for (int i = 0; i < 2000; ++i) {
            auto t = sample_task_structured(50, 1, rng);
            CHECK(t.latents.size() == 1);
            CHECK(t.observed.empty());
        }
    }
    SECTION("group spacing obeys the log-uniform support bound") {
        // within-group spacing of an accepted group is at most (N-1)/n_group,
        // so no sample may contain an index pair wider than N-1 apart
        for (int i = 0; i < 5000; ++i) {
            auto t = sample_task_structured(40, 8, rng);
            for (int idx : t.latents) {
                CHECK(idx >= 0);
                CHECK(idx < 40);
            }
        }
    }
    SECTION("joint (|X|, |Y|) distribution matches the independent oracle") {
        const int draws = 100000;
        Rng ra(100), rb(200);
        std::map<std::pair<int, int>, long> impl_counts, oracle_counts;
        for (int i = 0; i < draws; ++i) {
            auto t = sample_task_structured(30, 10, ra);
            impl_counts[{int(t.latents.size()), int(t.observed.size())}]++;
            auto o = oracle_structured(30, 10, rb);
            oracle_counts[{int(o.latents.size()), int(o.observed.size())}]++;
        }
        double p = test_stats::chi2_two_sample_p(impl_counts, oracle_counts);
        INFO("chi2 p = " << p);
        CHECK(p > 0.01);
    }
    SECTION("fixed seed reproduces the identical sequence") {
        Rng r1(77), r2(77);
        for (int i = 0; i < 100; ++i) {
            auto a = sample_task_structured(30, 10, r1);
            auto b = sample_task_structured(30, 10, r2);
            CHECK(a.latents == b.latents);
            CHECK(a.observed == b.observed);
        }
    }
}

TEST_CASE("uniform distribution") {
    Rng rng(31);
    SECTION("X never empty") {
        for (int i = 0; i < 20000; ++i) {
            auto t = sample_task_uniform(30, 10, rng);
            CHECK(!t.latents.empty());
        }
    }
    SECTION("K=1 yields one latent, no observed") {
        for (int i = 0; i < 1000; ++i) {
            auto t = sample_task_uniform(30, 1, rng);
            CHECK(t.latents.size() == 1);
            CHECK(t.observed.empty());
        }
    }
    SECTION("n_total marginal is uniform on 1..K") {
        const int draws = 100000, k = 10;
        std::vector<long> counts(std::size_t(k), 0);
        for (int i = 0; i < draws; ++i) {
            auto t = sample_task_uniform(30, k, rng);
            counts[t.latents.size() + t.observed.size() - 1]++;
        }
        std::vector<double> expected(std::size_t(k), double(draws) / k);
        double p = test_stats::chi2_gof_p(counts, expected);
        INFO("chi2 p = " << p);
        CHECK(p > 0.01);
    }
    SECTION("literal window variant stays within the first K frames") {
        for (int i = 0; i < 2000; ++i) {
            auto t = sample_task_uniform(30, 10, rng, true);
            for (int idx : t.latents) CHECK(idx < 10);
            for (int idx : t.observed) CHECK(idx < 10);
        }
    }
    SECTION("N below K rejected") {
        REQUIRE_THROWS_AS(sample_task_uniform(5, 10, rng), ValidationError);
    }
}

TEST_CASE("single task distribution") {
    Rng rng(41);
    SECTION("always ten given ten, contiguous and adjacent") {
        for (int i = 0; i < 20000; ++i) {
            auto t = sample_task_single(100, rng);
            REQUIRE(t.latents.size() == 10);
            REQUIRE(t.observed.size() == 10);
            for (int j = 1; j < 10; ++j) {
                CHECK(t.latents[std::size_t(j)] == t.latents[0] + j);
                CHECK(t.observed[std::size_t(j)] == t.observed[0] + j);
            }
            CHECK(t.latents[0] == t.observed[9] + 1);
        }
    }
    SECTION("N below 20 rejected") {
        REQUIRE_THROWS_AS(sample_task_single(19, rng), ValidationError);
    }
}
