#pragma once

// Greedy offline optimization of the observed sets Y_s for fixed latent
// stages [X_s]: initialize Y with the forced flanking neighbors of each
// latent run, then repeatedly append the candidate index with the lowest
// estimated denoising loss. Candidates at one greedy step share noise draws
// (common random numbers), seeded by a candidate-independent counter.

#include <algorithm>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "fdm/diffusion.hpp"
#include "fdm/rng.hpp"
#include "fdm/schemes.hpp"
#include "fdm/tensor.hpp"
#include "fdm/video.hpp"

namespace fdm {

struct OptimizerConfig {
    std::vector<int> t_grid;     // timesteps evaluated per estimate
    int videos_per_eval = 10;    // training videos per estimate
    int target_obs_count = 10;   // |Y_s| to reach per stage

    void validate(int t_max) const {
        if (t_grid.empty()) throw ValidationError("optimizer: t_grid must be non-empty");
        for (int t : t_grid)
            if (t < 1 || t > t_max) throw ValidationError("optimizer: t_grid entry outside 1..T");
        if (videos_per_eval < 1) throw ValidationError("optimizer: videos_per_eval must be >= 1");
        if (target_obs_count < 0) throw ValidationError("optimizer: negative target");
    }
};

inline std::vector<int> even_t_grid(int t_max, int count = 10) {
    std::vector<int> grid;
    for (int i = 1; i <= count; ++i)
        grid.push_back(std::max(1, int(std::lround(double(i) * t_max / double(count)))));
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

// Mean denoising loss over the (video, t) grid with noise drawn per (video, t)
// from the provided stream; identical streams give identical estimates.
template <typename Real>
double estimate_stage_loss(const DenoiserConfig& cfg, const ParamSet<Real>& params,
                           const NoiseSchedule& schedule, const std::vector<int>& latents,
                           const std::vector<int>& observed,
                           const std::vector<VideoTensor>& eval_videos,
                           const std::vector<int>& t_grid, const Rng& stream) {
    check_task_indices(latents, observed);
    std::set<int> seen;
    for (const auto* vec : {&latents, &observed})
        for (int i : *vec)
            if (!seen.insert(i).second)
                throw ValidationError("estimate_stage_loss: duplicate index " + std::to_string(i));
    if (eval_videos.empty()) throw ValidationError("estimate_stage_loss: no eval videos");
    for (int i : seen)
        if (i < 0 || i >= eval_videos[0].n_frames)
            throw ValidationError("estimate_stage_loss: index out of range");

    double total = 0.0;
    for (std::size_t v = 0; v < eval_videos.size(); ++v) {
        Tensor<Real> x0 = eval_videos[v].gather<Real>(latents);
        Tensor<Real> y = eval_videos[v].gather<Real>(observed);
        for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
            Rng er = stream.split(v * t_grid.size() + ti);
            Tensor<Real> eps = gaussian_like<Real>(x0.shape, er);
            total += double(
                denoising_loss(cfg, params, schedule, x0, y, latents, observed, t_grid[ti], eps));
        }
    }
    return total / double(eval_videos.size() * t_grid.size());
}

// Loss evaluator given (X, Y, stage, greedy step); productions bind
// estimate_stage_loss, tests may substitute stubs.
using StageLossFn =
    std::function<double(const std::vector<int>& latents, const std::vector<int>& observed,
                         int stage, int step)>;

template <typename Real>
StageLossFn make_stage_loss(const DenoiserConfig& cfg, const ParamSet<Real>& params,
                            const NoiseSchedule& schedule,
                            const std::vector<VideoTensor>& eval_videos,
                            const OptimizerConfig& opt, const Rng& master) {
    return [&cfg, &params, &schedule, &eval_videos, opt, master](
               const std::vector<int>& latents, const std::vector<int>& observed, int stage,
               int step) {
        // noise keyed by (stage, step) only: common random numbers across the
        // candidates compared at this step
        Rng stream = master.split(std::uint64_t(stage) * 4096 + std::uint64_t(step));
        return estimate_stage_loss(cfg, params, schedule, latents, observed, eval_videos,
                                   opt.t_grid, stream);
    };
}

struct OptTraceRow {
    int stage = 0;
    int step = 0;
    int candidate = 0;
    double loss = 0;
    bool chosen = false;
};

struct OptimizeResult {
    SamplingScheme scheme;
    std::vector<OptTraceRow> trace;
};

// Forced initialization: the closest available index before and after each
// latent index, availability meaning observed or sampled at an earlier stage.
inline std::vector<int> forced_neighbors(const std::vector<char>& available,
                                         const std::vector<int>& latents) {
    std::set<int> forced;
    const int n = int(available.size());
    for (int x : latents) {
        for (int b = x - 1; b >= 0; --b)
            if (available[std::size_t(b)]) {
                forced.insert(b);
                break;
            }
        for (int a = x + 1; a < n; ++a)
            if (available[std::size_t(a)]) {
                forced.insert(a);
                break;
            }
    }
    return {forced.begin(), forced.end()};
}

inline OptimizeResult optimize_observed(const std::vector<std::vector<int>>& latent_stages,
                                        int n, int n_obs, int k, int target_obs_count,
                                        const StageLossFn& loss) {
    if (n <= 0 || n_obs < 0 || n_obs > n) throw ValidationError("optimize: bad N/n_obs");
    OptimizeResult result;
    result.scheme.n_frames = n;
    result.scheme.budget = k;
    result.scheme.n_obs = n_obs;

    std::vector<char> available(std::size_t(n), 0);
    for (int i = 0; i < n_obs; ++i) available[std::size_t(i)] = 1;

    for (std::size_t s = 0; s < latent_stages.size(); ++s) {
        const auto& latents = latent_stages[s];
        if (latents.empty()) throw ValidationError("optimize: empty latent stage");
        if (target_obs_count > k - int(latents.size()))
            throw ValidationError("optimize: target exceeds budget K - |X|");

        std::vector<int> observed = forced_neighbors(available, latents);
        if (int(observed.size()) > target_obs_count)
            throw ValidationError("optimize: forced set larger than target at stage " +
                                  std::to_string(s));

        int step = 0;
        while (int(observed.size()) < target_obs_count) {
            std::set<int> used(observed.begin(), observed.end());
            for (int x : latents) used.insert(x);
            int best = -1;
            double best_loss = 0;
            std::vector<OptTraceRow> step_rows;
            for (int cand = 0; cand < n; ++cand) {
                if (!available[std::size_t(cand)] || used.count(cand)) continue;
                std::vector<int> trial = observed;
                trial.push_back(cand);
                std::sort(trial.begin(), trial.end());
                double l = loss(latents, trial, int(s), step);
                step_rows.push_back({int(s), step, cand, l, false});
                if (best == -1 || l < best_loss) {  // ties break toward the smaller index
                    best = cand;
                    best_loss = l;
                }
            }
            if (best == -1)
                throw ValidationError("optimize: no eligible candidates at stage " +
                                      std::to_string(s));
            for (auto& row : step_rows) row.chosen = row.candidate == best;
            result.trace.insert(result.trace.end(), step_rows.begin(), step_rows.end());
            observed.push_back(best);
            std::sort(observed.begin(), observed.end());
            ++step;
        }
        result.scheme.stages.push_back({latents, observed});
        for (int x : latents) available[std::size_t(x)] = 1;
    }
    require_valid(result.scheme);
    return result;
}

inline std::string trace_to_csv(const std::vector<OptTraceRow>& trace) {
    std::string out = "stage,step,candidate,loss,chosen\n";
    char buf[96];
    for (const auto& row : trace) {
        std::snprintf(buf, sizeof buf, "%d,%d,%d,%.9g,%d\n", row.stage, row.step, row.candidate,
                      row.loss, row.chosen ? 1 : 0);
        out += buf;
    }
    return out;
}

}  // namespace fdm
