#pragma once

// Conditional DDPM mathematics: forward noising, the unweighted denoising
// loss, the reverse transition, the conditional sampler, and stochastic
// gradient training with an adaptive-moment update rule.
//
// The reverse mean uses the standard derivation
//   mu = (x_t - (1-alpha_t)/sqrt(1-alpha_bar_t) * eps_theta) / sqrt(alpha_t),
// i.e. the 1/sqrt(alpha_t) prefactor applies to the full bracket. The
// one-step-inversion test pins this form down.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fdm/denoiser.hpp"
#include "fdm/graph.hpp"
#include "fdm/parallel.hpp"
#include "fdm/param_set.hpp"
#include "fdm/rng.hpp"
#include "fdm/schedule.hpp"
#include "fdm/tensor.hpp"
#include "fdm/video.hpp"

namespace fdm {

template <typename Real>
Tensor<Real> gaussian_like(const Shape& shape, Rng& rng) {
    Tensor<Real> t = Tensor<Real>::zeros(shape);
    for (auto& v : t.values) v = Real(rng.normal());
    return t;
}

// One step of the forward diffusion: x_t = sqrt(alpha_t) x_{t-1} + sqrt(1-alpha_t) eps.
template <typename Real>
Tensor<Real> forward_step(const NoiseSchedule& s, const Tensor<Real>& x_prev, int t,
                          const Tensor<Real>& eps) {
    s.check(t);
    if (!x_prev.same_shape(eps)) throw ValidationError("forward_step: eps shape mismatch");
    Real a = Real(std::sqrt(s.alpha_at(t)));
    Real b = Real(std::sqrt(1.0 - s.alpha_at(t)));
    Tensor<Real> out = x_prev;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = a * out.values[i] + b * eps.values[i];
    return out;
}

template <typename Real>
Tensor<Real> forward_step(const NoiseSchedule& s, const Tensor<Real>& x_prev, int t, Rng& rng) {
    return forward_step(s, x_prev, t, gaussian_like<Real>(x_prev.shape, rng));
}

// Closed-form marginal: x_t = sqrt(alpha_bar_t) x_0 + sqrt(1-alpha_bar_t) eps.
template <typename Real>
Tensor<Real> forward_marginal(const NoiseSchedule& s, const Tensor<Real>& x0, int t,
                              const Tensor<Real>& eps) {
    s.check(t);
    if (!x0.same_shape(eps)) throw ValidationError("forward_marginal: eps shape mismatch");
    Real a = Real(std::sqrt(s.alpha_bar_at(t)));
    Real b = Real(std::sqrt(1.0 - s.alpha_bar_at(t)));
    Tensor<Real> out = x0;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = a * out.values[i] + b * eps.values[i];
    return out;
}

// Pluggable denoiser so losses and samplers can run against stubs and oracles.
template <typename Real>
using DenoiserFn = std::function<Tensor<Real>(const Tensor<Real>& x_t, const Tensor<Real>& y,
                                              int t, const std::vector<int>& latents,
                                              const std::vector<int>& observed)>;

template <typename Real>
DenoiserFn<Real> make_model_denoiser(const DenoiserConfig& cfg, const ParamSet<Real>& params) {
    return [&cfg, &params](const Tensor<Real>& x_t, const Tensor<Real>& y, int t,
                           const std::vector<int>& latents, const std::vector<int>& observed) {
        return eval_epsilon_theta(cfg, params, x_t, y, t, latents, observed);
    };
}

inline void check_task_indices(const std::vector<int>& latents, const std::vector<int>& observed) {
    if (latents.empty()) throw ValidationError("task: latent index set must be non-empty");
    for (int x : latents)
        for (int yv : observed)
            if (x == yv)
                throw ValidationError("task: index " + std::to_string(x) + " in both X and Y");
}

// ||eps - eps_theta(sqrt(ab) x0 + sqrt(1-ab) eps, y, t)||^2 with lambda(t) = 1.
template <typename Real>
Real denoising_loss(const DenoiserFn<Real>& denoiser, const NoiseSchedule& s,
                    const Tensor<Real>& x0, const Tensor<Real>& y,
                    const std::vector<int>& latents, const std::vector<int>& observed, int t,
                    const Tensor<Real>& eps) {
    check_task_indices(latents, observed);
    if (x0.rows() != latents.size()) throw ValidationError("denoising_loss: |X| mismatch");
    if ((y.numel() ? y.rows() : 0) != observed.size())
        throw ValidationError("denoising_loss: |Y| mismatch");
    Tensor<Real> x_t = forward_marginal(s, x0, t, eps);
    Tensor<Real> pred = denoiser(x_t, y, t, latents, observed);
    if (!pred.same_shape(eps)) throw ValidationError("denoising_loss: denoiser output shape mismatch");
    Real loss = 0;
    for (std::size_t i = 0; i < eps.values.size(); ++i) {
        Real d = eps.values[i] - pred.values[i];
        loss += d * d;
    }
    return loss;
}

template <typename Real>
Real denoising_loss(const DenoiserConfig& cfg, const ParamSet<Real>& params,
                    const NoiseSchedule& s, const Tensor<Real>& x0, const Tensor<Real>& y,
                    const std::vector<int>& latents, const std::vector<int>& observed, int t,
                    const Tensor<Real>& eps) {
    return denoising_loss(make_model_denoiser(cfg, params), s, x0, y, latents, observed, t, eps);
}

// Tape version used for gradients. Mask covers [latents | observed]; padded
// batch entries pass their cross-video mask, under which a filler position
// may legitimately repeat an index of the other video, so index-collision
// checking is the group-aware one inside the denoiser builder.
template <typename Real>
typename Graph<Real>::Id build_denoising_loss(Graph<Real>& g, const ParamVars<Real>& vars,
                                              const DenoiserConfig& cfg, const NoiseSchedule& s,
                                              const Tensor<Real>& x0, const Tensor<Real>& y,
                                              const std::vector<int>& latents,
                                              const std::vector<int>& observed, int t,
                                              const Tensor<Real>& eps, const MaskMatrix& mask) {
    if (latents.empty()) throw ValidationError("denoising loss: latent set must be non-empty");
    auto x_t = g.constant(forward_marginal(s, x0, t, eps));
    auto yid = y.numel() > 0 ? g.constant(y) : typename Graph<Real>::Id(-1);
    auto pred = build_epsilon_theta(g, vars, cfg, x_t, yid, t, latents, observed, mask);
    return g.sum_squares(g.sub(g.constant(eps), pred));
}

// One reverse transition x_t -> x_{t-1}; the final step (t = 1) adds no noise.
template <typename Real>
Tensor<Real> reverse_step(const DenoiserFn<Real>& denoiser, const NoiseSchedule& s,
                          const Tensor<Real>& x_t, const Tensor<Real>& y, int t,
                          const std::vector<int>& latents, const std::vector<int>& observed,
                          Rng& rng) {
    s.check(t);
    Tensor<Real> pred = denoiser(x_t, y, t, latents, observed);
    double a = s.alpha_at(t);
    double ab = s.alpha_bar_at(t);
    Real coef = Real((1.0 - a) / std::sqrt(1.0 - ab));
    Real inv_sqrt_a = Real(1.0 / std::sqrt(a));
    Tensor<Real> out = x_t;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = (out.values[i] - coef * pred.values[i]) * inv_sqrt_a;
    if (t > 1) {
        Real sigma = Real(s.sigma_at(t));
        for (auto& v : out.values) v += sigma * Real(rng.normal());
    }
    return out;
}

// Conditional sampler: x_T ~ N(0, I) of shape (|X|, frame_dim), then reverse
// steps for t = T..1 conditioning on y throughout.
template <typename Real>
Tensor<Real> ddpm_sample(const DenoiserFn<Real>& denoiser, const NoiseSchedule& s, int frame_dim,
                         const Tensor<Real>& y, const std::vector<int>& latents,
                         const std::vector<int>& observed, Rng& rng) {
    check_task_indices(latents, observed);
    Tensor<Real> x = gaussian_like<Real>({latents.size(), std::size_t(frame_dim)}, rng);
    for (int t = s.T; t >= 1; --t) x = reverse_step(denoiser, s, x, y, t, latents, observed, rng);
    return x;
}

template <typename Real>
Tensor<Real> ddpm_sample(const DenoiserConfig& cfg, const ParamSet<Real>& params,
                         const NoiseSchedule& s, const Tensor<Real>& y,
                         const std::vector<int>& latents, const std::vector<int>& observed,
                         Rng& rng) {
    if (int(latents.size() + observed.size()) > cfg.max_frames)
        throw ValidationError("ddpm_sample: |X|+|Y| exceeds model K");
    return ddpm_sample(make_model_denoiser(cfg, params), s, cfg.frame_dim, y, latents, observed,
                       rng);
}

// ---- training ----

template <typename Real>
struct AdamState {
    ParamSet<Real> m, v;
    long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void init_like(const ParamSet<Real>& params) {
        for (const auto& [name, t] : params) {
            m.set(name, Tensor<Real>::zeros(t.shape));
            v.set(name, Tensor<Real>::zeros(t.shape));
        }
        step = 0;
    }

    void update(ParamSet<Real>& params, const ParamSet<Real>& grads, double lr) {
        if (m.empty()) init_like(params);
        ++step;
        double bc1 = 1.0 - std::pow(beta1, double(step));
        double bc2 = 1.0 - std::pow(beta2, double(step));
        for (auto& [name, p] : params) {
            const auto& gt = grads.get(name);
            auto& mt = m.get(name);
            auto& vt = v.get(name);
            for (std::size_t i = 0; i < p.numel(); ++i) {
                double gi = double(gt.values[i]);
                double mi = beta1 * double(mt.values[i]) + (1.0 - beta1) * gi;
                double vi = beta2 * double(vt.values[i]) + (1.0 - beta2) * gi * gi;
                mt.values[i] = Real(mi);
                vt.values[i] = Real(vi);
                p.values[i] -= Real(lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps));
            }
        }
    }
};

using TaskSampler = std::function<std::pair<std::vector<int>, std::vector<int>>(int n_frames, Rng&)>;

struct TrainOptions {
    long steps = 0;
    double lr = 1e-4;
    int batch = 8;
    bool pad_to_k = true;
    long log_every = 1;
};

struct TrainLog {
    std::vector<std::pair<long, double>> losses;  // (step, mean batch loss)
};

// Stochastic-gradient training of the denoising loss: video and task drawn per
// batch element, t uniform on 1..T, fresh noise each time. Batch elements are
// evaluated on independent tapes (parallel-safe); gradients are summed in
// element order so thread count never changes results.
template <typename Real>
TrainLog train(const DenoiserConfig& cfg, ParamSet<Real>& params, const NoiseSchedule& s,
               const std::vector<VideoTensor>& dataset, const TaskSampler& tasks,
               const TrainOptions& opt, Rng& rng, AdamState<Real>* state = nullptr) {
    cfg.validate();
    if (dataset.empty()) throw ValidationError("train: dataset is empty");
    if (opt.batch < 1) throw ValidationError("train: batch must be >= 1");
    const int n_frames = dataset[0].n_frames;

    AdamState<Real> local_state;
    AdamState<Real>& adam = state ? *state : local_state;

    FillerSource<Real> filler = [&dataset](int n, Rng& r) {
        const auto& v = dataset[std::size_t(r.uniform_int(0, long(dataset.size()) - 1))];
        if (n > v.n_frames) throw ValidationError("train: filler video shorter than pad request");
        std::vector<int> idx = r.sample_without_replacement(v.n_frames, n);
        return std::make_pair(v.template gather<Real>(idx), idx);
    };

    TrainLog log;
    std::vector<GradResult<Real>> results(std::size_t(opt.batch));
    for (long step = 0; step < opt.steps; ++step) {
        // per-element streams keyed by (step, element): parallel order never
        // changes the draws
        try {
            parallel_for(std::size_t(opt.batch), [&](std::size_t e) {
            Rng er = rng.split(std::uint64_t(step) * std::uint64_t(opt.batch) + e + 1);
            const auto& video = dataset[std::size_t(er.uniform_int(0, long(dataset.size()) - 1))];
            auto [X, Y] = tasks(n_frames, er);
            TrainExample<Real> ex{video.template gather<Real>(X), video.template gather<Real>(Y), X, Y};
            PaddedExample<Real> pe =
                opt.pad_to_k ? pad_example<Real>(ex, filler, cfg.max_frames, er)
                             : PaddedExample<Real>{ex.x0, ex.y, ex.latents, ex.observed,
                                                   MaskMatrix::all_true(X.size() + Y.size()),
                                                   X.size()};
            int t = int(er.uniform_int(1, s.T));
            Tensor<Real> eps = gaussian_like<Real>(pe.x0.shape, er);
            results[e] = grad<Real>(
                [&](Graph<Real>& g, const ParamVars<Real>& vars) {
                    return build_denoising_loss(g, vars, cfg, s, pe.x0, pe.y, pe.latents,
                                                pe.observed, t, eps, pe.mask);
                },
                params);
            });
        } catch (const NumericalError& e) {
            throw NumericalError("train: aborted at step " + std::to_string(step) + ": " +
                                 e.what());
        }

        double mean_loss = 0;
        ParamSet<Real> grads;
        for (int e = 0; e < opt.batch; ++e) {
            mean_loss += double(results[std::size_t(e)].loss);
            if (e == 0) {
                grads = std::move(results[0].grads);
            } else {
                for (auto& [name, gacc] : grads) {
                    const auto& ge = results[std::size_t(e)].grads.get(name);
                    for (std::size_t i = 0; i < gacc.numel(); ++i) gacc.values[i] += ge.values[i];
                }
            }
        }
        mean_loss /= double(opt.batch);
        if (!std::isfinite(mean_loss))
            throw NumericalError("train: non-finite loss at step " + std::to_string(step));
        Real inv_b = Real(1.0 / double(opt.batch));
        for (auto& [name, gacc] : grads)
            for (auto& v : gacc.values) v *= inv_b;
        adam.update(params, grads, opt.lr);
        if (step % opt.log_every == 0 || step == opt.steps - 1)
            log.losses.emplace_back(step, mean_loss);
    }
    return log;
}

}  // namespace fdm
