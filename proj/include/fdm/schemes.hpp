#pragma once

// Sampling schemes: ordered stages of (latent, observed) frame index sets, a
// validator for the three scheme constraints (coverage, causal conditioning,
// frame budget), the stage-by-stage video completion loop, the catalog of
// named schemes, and the adaptive conditioning heuristic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdm/rng.hpp"
#include "fdm/tensor.hpp"
#include "fdm/video.hpp"

namespace fdm {

struct SamplingStage {
    std::vector<int> latents;   // X_s, sampled at this stage
    std::vector<int> observed;  // Y_s, conditioned on at this stage
};

struct SamplingScheme {
    std::vector<SamplingStage> stages;
    int n_frames = 0;  // N
    int budget = 0;    // K
    int n_obs = 0;     // initially observed prefix length
};

struct SchemeViolation {
    int stage = -1;  // -1 for scheme-level problems
    std::string message;
};

inline std::vector<SchemeViolation> validate(const SamplingScheme& scheme) {
    std::vector<SchemeViolation> out;
    auto flag = [&out](int stage, std::string msg) { out.push_back({stage, std::move(msg)}); };

    if (scheme.n_frames <= 0) flag(-1, "video length must be positive");
    if (scheme.n_obs < 0 || scheme.n_obs > scheme.n_frames)
        flag(-1, "observed prefix outside [0, N]");

    std::vector<char> available(std::size_t(std::max(scheme.n_frames, 0)), 0);
    for (int i = 0; i < scheme.n_obs; ++i) available[std::size_t(i)] = 1;

    for (std::size_t s = 0; s < scheme.stages.size(); ++s) {
        const auto& st = scheme.stages[s];
        int stage = int(s);
        if (st.latents.empty()) flag(stage, "latent set X is empty");
        if (int(st.latents.size() + st.observed.size()) > scheme.budget)
            flag(stage, "|X|+|Y| = " + std::to_string(st.latents.size() + st.observed.size()) +
                            " exceeds budget K = " + std::to_string(scheme.budget));
        std::set<int> xs(st.latents.begin(), st.latents.end());
        if (xs.size() != st.latents.size()) flag(stage, "duplicate indices within X");
        std::set<int> ys(st.observed.begin(), st.observed.end());
        if (ys.size() != st.observed.size()) flag(stage, "duplicate indices within Y");
        for (int x : st.latents) {
            if (x < 0 || x >= scheme.n_frames) {
                flag(stage, "latent index " + std::to_string(x) + " out of range");
            } else if (ys.count(x)) {
                flag(stage, "index " + std::to_string(x) + " in both X and Y");
            }
        }
        for (int y : st.observed) {
            if (y < 0 || y >= scheme.n_frames) {
                flag(stage, "observed index " + std::to_string(y) + " out of range");
            } else if (!available[std::size_t(y)]) {
                flag(stage, "conditions on frame " + std::to_string(y) +
                                " before it is sampled");
            }
        }
        for (int x : st.latents)
            if (x >= 0 && x < scheme.n_frames) available[std::size_t(x)] = 1;
    }
    for (int i = scheme.n_obs; i < scheme.n_frames; ++i)
        if (!available[std::size_t(i)])
            flag(-1, "frame " + std::to_string(i) + " is never sampled");
    return out;
}

inline void require_valid(const SamplingScheme& scheme) {
    auto violations = validate(scheme);
    if (!violations.empty()) {
        std::string msg = "invalid sampling scheme:";
        for (const auto& v : violations)
            msg += "\n  [stage " + std::to_string(v.stage) + "] " + v.message;
        throw ValidationError(msg);
    }
}

// ---- the completion loop ----

// Draws the latent frames of one stage given gathered observed frames.
using StageSampler = std::function<Tensor<float>(const Tensor<float>& y,
                                                 const std::vector<int>& latents,
                                                 const std::vector<int>& observed, Rng& rng)>;

// Runs a validated scheme over a video whose observed prefix holds real
// values; every stage gathers y = v[Y_s], samples x, and writes v[X_s] = x.
inline VideoTensor sample_video(const StageSampler& sampler, VideoTensor video,
                                const SamplingScheme& scheme, Rng& rng) {
    require_valid(scheme);
    if (video.n_frames != scheme.n_frames)
        throw ValidationError("sample_video: video length does not match scheme");
    for (const auto& stage : scheme.stages) {
        Tensor<float> y = video.gather<float>(stage.observed);
        Tensor<float> x = sampler(y, stage.latents, stage.observed, rng);
        if (x.rows() != stage.latents.size() || int(x.cols()) != video.frame_dim)
            throw ValidationError("sample_video: sampler returned wrong shape");
        video.scatter(stage.latents, x);
    }
    return video;
}

// ---- catalog generators ----

namespace detail {

// m indices evenly spaced over [lo, hi] inclusive, deduplicated and sorted.
inline std::vector<int> even_spaced(int lo, int hi, int m) {
    std::vector<int> out;
    if (m <= 0 || hi < lo) return out;
    if (m == 1) {
        out.push_back(lo);
        return out;
    }
    for (int i = 0; i < m; ++i) {
        double f = double(i) / double(m - 1);
        out.push_back(int(std::lround(lo + f * double(hi - lo))));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

inline void check_scheme_args(int n, int n_obs, int k) {
    if (n <= 0 || n_obs < 0 || n_obs > n) throw ValidationError("scheme: bad N/n_obs");
    if (k < 2) throw ValidationError("scheme: budget K must be >= 2");
}

}  // namespace detail

// Autoreg: sample the next floor(K/2) consecutive frames conditioned on the
// immediately preceding ceil(K/2) frames; the final stage shrinks its latent
// set to the remainder.
inline SamplingScheme make_autoreg(int n, int n_obs, int k) {
    detail::check_scheme_args(n, n_obs, k);
    int step = k / 2;
    int cond = k - step;
    if (n_obs < cond) throw ValidationError("autoreg: observed prefix shorter than context");
    SamplingScheme scheme{{}, n, k, n_obs};
    for (int start = n_obs; start < n; start += step) {
        SamplingStage st;
        int stop = std::min(start + step, n);
        for (int i = start; i < stop; ++i) st.latents.push_back(i);
        for (int i = start - cond; i < start; ++i) st.observed.push_back(i);
        scheme.stages.push_back(std::move(st));
    }
    return scheme;
}

// Long-range: same latent blocks as Autoreg, but conditions on floor(K/4)
// most recent frames plus floor(K/4) evenly spaced frames of the observed
// prefix.
inline SamplingScheme make_long_range(int n, int n_obs, int k) {
    detail::check_scheme_args(n, n_obs, k);
    int step = k / 2;
    int quarter = k / 4;
    if (quarter < 1) throw ValidationError("long-range: K must be >= 4");
    if (n_obs < quarter) throw ValidationError("long-range: observed prefix too short");
    std::vector<int> prefix = detail::even_spaced(0, n_obs - 1, quarter);
    SamplingScheme scheme{{}, n, k, n_obs};
    for (int start = n_obs; start < n; start += step) {
        SamplingStage st;
        int stop = std::min(start + step, n);
        for (int i = start; i < stop; ++i) st.latents.push_back(i);
        for (int i = start - quarter; i < start; ++i) st.observed.push_back(i);
        for (int p : prefix)
            if (std::find(st.observed.begin(), st.observed.end(), p) == st.observed.end())
                st.observed.push_back(p);
        std::sort(st.observed.begin(), st.observed.end());
        scheme.stages.push_back(std::move(st));
    }
    return scheme;
}

namespace detail {

// Gap-filling stages: groups of up to floor(K/2) consecutive missing frames,
// each conditioned on the nearest already-available frames on both sides.
inline void fill_gaps(SamplingScheme& scheme, std::vector<char>& available, int k) {
    const int n = scheme.n_frames;
    const int chunk_max = std::max(1, k / 2);
    for (int i = 0; i < n; ++i) {
        if (available[std::size_t(i)]) continue;
        int gap_end = i;
        while (gap_end < n && !available[std::size_t(gap_end)]) ++gap_end;
        for (int start = i; start < gap_end; start += chunk_max) {
            int stop = std::min(start + chunk_max, gap_end);
            SamplingStage st;
            for (int f = start; f < stop; ++f) st.latents.push_back(f);
            int room = k - int(st.latents.size());
            int before = (room + 1) / 2, after = room / 2;
            for (int f = start - 1; f >= 0 && before > 0; --f)
                if (available[std::size_t(f)]) {
                    st.observed.push_back(f);
                    --before;
                }
            for (int f = stop; f < n && after > 0; ++f)
                if (available[std::size_t(f)]) {
                    st.observed.push_back(f);
                    --after;
                }
            std::sort(st.observed.begin(), st.observed.end());
            for (int f = start; f < stop; ++f) available[std::size_t(f)] = 1;
            scheme.stages.push_back(std::move(st));
        }
        i = gap_end;
    }
}

}  // namespace detail

// Hierarchy-2/3: a coarse pass samples floor(K/2) evenly spaced frames over
// the unobserved span conditioned on floor(K/2) evenly spaced observed
// frames; Hierarchy-3 inserts an intermediate-spacing pass per coarse gap;
// the final level fills each remaining gap with consecutive frames
// conditioned on the nearest available frames on both sides.
inline SamplingScheme make_hierarchy(int n, int n_obs, int k, int levels) {
    detail::check_scheme_args(n, n_obs, k);
    if (levels != 2 && levels != 3) throw ValidationError("hierarchy: levels must be 2 or 3");
    if (n_obs < 1) throw ValidationError("hierarchy: needs an observed prefix");
    if (n_obs >= n) {
        return SamplingScheme{{}, n, k, n_obs};  // nothing to sample
    }
    SamplingScheme scheme{{}, n, k, n_obs};
    std::vector<char> available(std::size_t(n), 0);
    for (int i = 0; i < n_obs; ++i) available[std::size_t(i)] = 1;

    int half = std::max(1, k / 2);
    SamplingStage coarse;
    coarse.latents = detail::even_spaced(n_obs, n - 1, std::min(half, n - n_obs));
    coarse.observed = detail::even_spaced(0, n_obs - 1, std::min(half, n_obs));
    for (int f : coarse.latents) available[std::size_t(f)] = 1;
    scheme.stages.push_back(coarse);

    if (levels == 3) {
        // intermediate pass inside each coarse gap larger than the chunk size
        std::vector<int> anchors;
        for (int i = 0; i < n; ++i)
            if (available[std::size_t(i)]) anchors.push_back(i);
        for (std::size_t a = 0; a + 1 < anchors.size(); ++a) {
            int lo = anchors[a], hi = anchors[a + 1];
            int gap = hi - lo - 1;
            if (gap <= half) continue;
            SamplingStage st;
            st.latents = detail::even_spaced(lo + 1, hi - 1, std::min(half, gap));
            int room = k - int(st.latents.size());
            std::vector<int> cond;
            for (int f = lo; f >= 0 && int(cond.size()) < (room + 1) / 2; --f)
                if (available[std::size_t(f)]) cond.push_back(f);
            for (int f = hi; f < n && int(cond.size()) < room; ++f)
                if (available[std::size_t(f)]) cond.push_back(f);
            std::sort(cond.begin(), cond.end());
            st.observed = std::move(cond);
            for (int f : st.latents) available[std::size_t(f)] = 1;
            scheme.stages.push_back(std::move(st));
        }
    }

    detail::fill_gaps(scheme, available, k);
    return scheme;
}

// Two temporal resolutions: phase 1 samples the stride-`skip` grid
// autoregressively; phase 2 infills the remaining frames conditioned on each
// latent's nearest available neighbors.
inline SamplingScheme make_two_res(int n, int n_obs, int k, int skip) {
    detail::check_scheme_args(n, n_obs, k);
    if (skip < 2) throw ValidationError("two-res: stride must be >= 2");
    SamplingScheme scheme{{}, n, k, n_obs};
    std::vector<char> available(std::size_t(n), 0);
    for (int i = 0; i < n_obs; ++i) available[std::size_t(i)] = 1;

    // phase 1: coarse grid n_obs, n_obs+skip, ... via autoregressive stages
    std::vector<int> grid;
    for (int f = n_obs; f < n; f += skip) grid.push_back(f);
    int coarse_step = std::max(1, (k + 1) / 2);
    int coarse_cond = k - coarse_step;
    for (std::size_t g0 = 0; g0 < grid.size(); g0 += std::size_t(coarse_step)) {
        SamplingStage st;
        for (std::size_t i = g0; i < std::min(grid.size(), g0 + std::size_t(coarse_step)); ++i)
            st.latents.push_back(grid[i]);
        // condition on the grid-aligned frames immediately before this block
        int first = st.latents.front();
        int want = coarse_cond;
        for (int f = first - skip; f >= 0 && want > 0; f -= skip)
            if (available[std::size_t(f)] || f < n_obs) {
                st.observed.push_back(f);
                --want;
            }
        std::sort(st.observed.begin(), st.observed.end());
        for (int f : st.latents) available[std::size_t(f)] = 1;
        scheme.stages.push_back(std::move(st));
    }

    // phase 2: infill missing frames, greedily growing each stage while the
    // latents plus their flanking available neighbors fit in the budget
    std::vector<int> missing;
    for (int f = n_obs; f < n; ++f)
        if (!available[std::size_t(f)]) missing.push_back(f);
    std::size_t i = 0;
    while (i < missing.size()) {
        SamplingStage st;
        std::set<int> cond;
        while (i < missing.size()) {
            int f = missing[i];
            std::set<int> cond_try = cond;
            for (int b = f - 1; b >= 0; --b)
                if (available[std::size_t(b)]) {
                    cond_try.insert(b);
                    break;
                }
            for (int a = f + 1; a < n; ++a)
                if (available[std::size_t(a)]) {
                    cond_try.insert(a);
                    break;
                }
            if (!st.latents.empty() &&
                int(st.latents.size()) + 1 + int(cond_try.size()) > k)
                break;
            st.latents.push_back(f);
            cond = std::move(cond_try);
            ++i;
        }
        st.observed.assign(cond.begin(), cond.end());
        for (int f : st.latents) available[std::size_t(f)] = 1;
        scheme.stages.push_back(std::move(st));
    }
    return scheme;
}

// ---- adaptive conditioning ----

// Provides frame vectors for already-available frames.
using FrameAccess = std::function<const float*(int index)>;

inline std::vector<int> adaptive_forced_init(const std::vector<int>& available,
                                             const std::vector<int>& latents) {
    if (latents.empty()) throw ValidationError("adaptive: empty latent set");
    int first = *std::min_element(latents.begin(), latents.end());
    int last = *std::max_element(latents.begin(), latents.end());
    std::set<int> forced;
    int best_before = -1, best_after = -1;
    for (int a : available) {
        if (a < first && (best_before == -1 || a > best_before)) best_before = a;
        if (a > last && (best_after == -1 || a < best_after)) best_after = a;
        if (a > first && a < last) forced.insert(a);  // anything between
    }
    if (best_before != -1) forced.insert(best_before);
    if (best_after != -1) forced.insert(best_after);
    return {forced.begin(), forced.end()};
}

// Greedy max-min-distance selection: starting from the forced indices, append
// the available frame whose minimum Euclidean distance to the current set is
// largest, until the budget is reached. Ties break toward the smaller index.
inline std::vector<int> adaptive_select(const std::vector<int>& available,
                                        const FrameAccess& frames, int frame_dim,
                                        const std::vector<int>& latents, int target,
                                        const std::vector<int>& forced) {
    if (available.empty()) throw ValidationError("adaptive_select: no available frames");
    if (target < int(forced.size()))
        throw ValidationError("adaptive_select: budget below forced set size");
    std::set<int> avail_set(available.begin(), available.end());
    for (int f : forced)
        if (!avail_set.count(f))
            throw ValidationError("adaptive_select: forced index not available");
    std::set<int> latent_set(latents.begin(), latents.end());

    std::vector<int> chosen = forced;
    std::sort(chosen.begin(), chosen.end());
    auto dist = [&](int a, int b) {
        const float* fa = frames(a);
        const float* fb = frames(b);
        double s = 0;
        for (int c = 0; c < frame_dim; ++c) {
            double d = double(fa[c]) - double(fb[c]);
            s += d * d;
        }
        return std::sqrt(s);
    };
    while (int(chosen.size()) < target) {
        int best = -1;
        double best_score = -1.0;
        for (int cand : available) {
            if (latent_set.count(cand)) continue;
            if (std::find(chosen.begin(), chosen.end(), cand) != chosen.end()) continue;
            double score = std::numeric_limits<double>::infinity();
            for (int c : chosen) score = std::min(score, dist(cand, c));
            if (chosen.empty()) score = 0.0;
            if (score > best_score) {
                best_score = score;
                best = cand;
            }
        }
        if (best == -1) break;  // no more candidates
        chosen.push_back(best);
        std::sort(chosen.begin(), chosen.end());
    }
    return chosen;
}

// Resolves the adaptive Hierarchy-2 scheme against concrete frame values:
// stage latents follow Hierarchy-2; observed sets are chosen by the greedy
// diversity heuristic over whatever is available at that stage.
inline SamplingScheme resolve_adaptive_hierarchy2(int n, int n_obs, int k,
                                                  const FrameAccess& frames, int frame_dim) {
    SamplingScheme base = make_hierarchy(n, n_obs, k, 2);
    SamplingScheme out{{}, n, k, n_obs};
    std::vector<int> available;
    for (int i = 0; i < n_obs; ++i) available.push_back(i);
    for (const auto& stage : base.stages) {
        SamplingStage st;
        st.latents = stage.latents;
        int target = std::min(k - int(st.latents.size()), int(available.size()));
        auto forced = adaptive_forced_init(available, st.latents);
        if (int(forced.size()) > target) forced.resize(std::size_t(target));
        st.observed = adaptive_select(available, frames, frame_dim, st.latents, target, forced);
        for (int f : st.latents) available.push_back(f);
        std::sort(available.begin(), available.end());
        out.stages.push_back(std::move(st));
    }
    return out;
}

// Adaptive completion: like sample_video but the conditioning sets are chosen
// from the frames generated so far.
inline VideoTensor sample_video_adaptive(const StageSampler& sampler, VideoTensor video,
                                         int n_obs, int k, Rng& rng) {
    SamplingScheme base = make_hierarchy(video.n_frames, n_obs, k, 2);
    std::vector<int> available;
    for (int i = 0; i < n_obs; ++i) available.push_back(i);
    FrameAccess frames = [&video](int idx) { return video.frame(idx); };
    for (const auto& stage : base.stages) {
        int target = std::min(k - int(stage.latents.size()), int(available.size()));
        auto forced = adaptive_forced_init(available, stage.latents);
        if (int(forced.size()) > target) forced.resize(std::size_t(target));
        auto observed =
            adaptive_select(available, frames, video.frame_dim, stage.latents, target, forced);
        Tensor<float> y = video.gather<float>(observed);
        Tensor<float> x = sampler(y, stage.latents, observed, rng);
        video.scatter(stage.latents, x);
        available.insert(available.end(), stage.latents.begin(), stage.latents.end());
        std::sort(available.begin(), available.end());
    }
    return video;
}

// ---- JSON scheme files ----

inline nlohmann::json scheme_to_json(const SamplingScheme& scheme) {
    nlohmann::json j;
    j["N"] = scheme.n_frames;
    j["K"] = scheme.budget;
    j["n_obs"] = scheme.n_obs;
    j["stages"] = nlohmann::json::array();
    for (const auto& st : scheme.stages) j["stages"].push_back({{"X", st.latents}, {"Y", st.observed}});
    return j;
}

inline SamplingScheme scheme_from_json(const nlohmann::json& j) {
    SamplingScheme scheme;
    try {
        scheme.n_frames = j.at("N").get<int>();
        scheme.budget = j.at("K").get<int>();
        scheme.n_obs = j.at("n_obs").get<int>();
        for (const auto& st : j.at("stages")) {
            SamplingStage stage;
            stage.latents = st.at("X").get<std::vector<int>>();
            stage.observed = st.at("Y").get<std::vector<int>>();
            scheme.stages.push_back(std::move(stage));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("scheme json: ") + e.what());
    }
    return scheme;
}

}  // namespace fdm
