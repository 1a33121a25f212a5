#pragma once

// Training-task distributions over (X, Y): the structured group-based
// distribution, the uniform ablation, and the fixed 10-given-10 single task.

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "fdm/rng.hpp"
#include "fdm/tensor.hpp"

namespace fdm {

struct TaskSample {
    std::vector<int> latents;   // X, never empty
    std::vector<int> observed;  // Y
    int n_frames = 0;
};

inline void check_task_sample(const TaskSample& task, int k) {
    if (task.latents.empty()) throw ValidationError("task sample: X empty");
    if (int(task.latents.size() + task.observed.size()) > k)
        throw ValidationError("task sample: budget exceeded");
    std::set<int> seen;
    for (const auto* vec : {&task.latents, &task.observed})
        for (int i : *vec) {
            if (i < 0 || i >= task.n_frames) throw ValidationError("task sample: index out of range");
            if (!seen.insert(i).second) throw ValidationError("task sample: duplicate index");
        }
}

// Structured distribution: repeatedly draw a regularly-spaced group of frame
// indices (count uniform on 1..K, spacing log-uniform, position uniform,
// observed with probability 1/2; the first group is always latent) and stop
// when a group would push the total past K.
inline TaskSample sample_task_structured(int n, int k, Rng& rng) {
    if (n < 1 || k < 1) throw ValidationError("structured task: need N >= 1, K >= 1");
    std::set<int> latents, observed;
    while (true) {
        long n_group = rng.uniform_int(1, k);
        double s_max = std::max(1.0, double(n - 1) / double(n_group));
        double s_group = rng.log_uniform(1.0, s_max);
        double x_group = rng.uniform(0.0, double(n) - double(n_group - 1) * s_group);
        bool o_group = rng.bernoulli(0.5);
        std::set<int> group;
        for (long i = 0; i < n_group; ++i) {
            int idx = int(std::floor(x_group + s_group * double(i)));
            if (idx >= n) idx = n - 1;  // floor of x < N can still hit N on the boundary
            if (!latents.count(idx) && !observed.count(idx)) group.insert(idx);
        }
        if (latents.size() + observed.size() + group.size() > std::size_t(k))
            break;
        if (latents.empty() || !o_group)
            latents.insert(group.begin(), group.end());
        else
            observed.insert(group.begin(), group.end());
        // all N indices taken: no future group can grow the sample
        if (int(latents.size() + observed.size()) == n) break;
    }
    TaskSample out;
    out.n_frames = n;
    out.latents.assign(latents.begin(), latents.end());
    out.observed.assign(observed.begin(), observed.end());
    return out;
}

// Uniform ablation: n_total ~ U(1, K) indices without replacement, first
// n_obs ~ U(0, n_total-1) of them observed. Positions default to all N frame
// indices; `literal_window` restricts them to the first K frames as printed.
inline TaskSample sample_task_uniform(int n, int k, Rng& rng, bool literal_window = false) {
    if (n < k) throw ValidationError("uniform task: need N >= K");
    if (k < 1) throw ValidationError("uniform task: need K >= 1");
    int n_total = int(rng.uniform_int(1, k));
    int support = literal_window ? k : n;
    // draw order matters: the first n_obs entries become Y
    std::vector<int> pool(static_cast<std::size_t>(support));
    for (int i = 0; i < support; ++i) pool[std::size_t(i)] = i;
    for (int i = 0; i < n_total; ++i) {
        int j = int(rng.uniform_int(i, support - 1));
        std::swap(pool[std::size_t(i)], pool[std::size_t(j)]);
    }
    int n_obs = int(rng.uniform_int(0, n_total - 1));
    TaskSample out;
    out.n_frames = n;
    out.observed.assign(pool.begin(), pool.begin() + n_obs);
    out.latents.assign(pool.begin() + n_obs, pool.begin() + n_total);
    std::sort(out.observed.begin(), out.observed.end());
    std::sort(out.latents.begin(), out.latents.end());
    return out;
}

// Single task: predict ten consecutive frames given the previous ten, at a
// uniformly random offset.
inline TaskSample sample_task_single(int n, Rng& rng) {
    if (n < 20) throw ValidationError("single task: need N >= 20");
    int offset = int(rng.uniform_int(0, n - 20));
    TaskSample out;
    out.n_frames = n;
    for (int i = 0; i < 10; ++i) out.observed.push_back(offset + i);
    for (int i = 10; i < 20; ++i) out.latents.push_back(offset + i);
    return out;
}

}  // namespace fdm
