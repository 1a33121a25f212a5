#pragma once

// The flexible denoising network: per-frame residual MLP blocks interleaved
// with temporal attention across frames. Attention carries relative position
// encodings computed by a small network from signed frame-index differences,
// the input carries an observed-indicator channel, and only rows for latent
// frames are returned. Built as graph ops so the same code path serves
// training (with gradients) and sampling (forward only).

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "fdm/graph.hpp"
#include "fdm/param_set.hpp"
#include "fdm/rng.hpp"
#include "fdm/tensor.hpp"

namespace fdm {

struct DenoiserConfig {
    int frame_dim = 2;
    int channels = 64;   // C
    int blocks = 2;      // L
    int heads = 4;
    int max_frames = 20;    // K: hard bound on jointly represented frames
    int diffusion_steps = 1000;  // T
    int max_video_len = 1000;    // N_max

    int head_dim() const { return channels / heads; }

    void validate() const {
        if (channels <= 0 || heads <= 0 || channels % heads != 0)
            throw ValidationError("denoiser config: channels must be divisible by heads");
        if (max_frames < 2) throw ValidationError("denoiser config: K must be >= 2");
        if (blocks < 1) throw ValidationError("denoiser config: blocks must be >= 1");
        if (frame_dim < 1 || diffusion_steps < 1 || max_video_len < 1)
            throw ValidationError("denoiser config: sizes must be positive");
    }
};

// Flat key=value serialization for config sidecar files.
inline std::map<std::string, std::string> config_to_kv(const DenoiserConfig& c) {
    return {
        {"frame_dim", std::to_string(c.frame_dim)},
        {"channels", std::to_string(c.channels)},
        {"blocks", std::to_string(c.blocks)},
        {"heads", std::to_string(c.heads)},
        {"max_frames", std::to_string(c.max_frames)},
        {"diffusion_steps", std::to_string(c.diffusion_steps)},
        {"max_video_len", std::to_string(c.max_video_len)},
    };
}

inline DenoiserConfig config_from_kv(const std::map<std::string, std::string>& kv) {
    DenoiserConfig c;
    auto geti = [&](const char* key, int& out) {
        auto it = kv.find(key);
        if (it == kv.end()) throw ValidationError(std::string("config: missing key ") + key);
        out = std::stoi(it->second);
    };
    geti("frame_dim", c.frame_dim);
    geti("channels", c.channels);
    geti("blocks", c.blocks);
    geti("heads", c.heads);
    geti("max_frames", c.max_frames);
    geti("diffusion_steps", c.diffusion_steps);
    geti("max_video_len", c.max_video_len);
    c.validate();
    return c;
}

namespace keys {
inline std::string layer(int l, const std::string& suffix) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02d", l);
    return "layers." + std::string(buf) + "." + suffix;
}
}  // namespace keys

template <typename Real>
ParamSet<Real> init_denoiser_params(const DenoiserConfig& cfg, Rng& rng) {
    cfg.validate();
    auto dense = [&rng](int rows, int cols) {
        Tensor<Real> t = Tensor<Real>::zeros({std::size_t(rows), std::size_t(cols)});
        Real scale = Real(1.0 / std::sqrt(double(rows)));
        for (auto& v : t.values) v = Real(rng.normal()) * scale;
        return t;
    };
    auto vec = [](int n, Real fill) { return Tensor<Real>::full({std::size_t(n)}, fill); };

    const int C = cfg.channels;
    ParamSet<Real> p;
    p.set("input_proj.w", dense(cfg.frame_dim + 1, C));
    p.set("input_proj.b", vec(C, 0));
    p.set("time_embed.w", dense(C, C));
    p.set("time_embed.b", vec(C, 0));
    for (int l = 0; l < cfg.blocks; ++l) {
        p.set(keys::layer(l, "norm.gain"), vec(C, 1));
        p.set(keys::layer(l, "norm.bias"), vec(C, 0));
        p.set(keys::layer(l, "mlp.w1"), dense(C, C));
        p.set(keys::layer(l, "mlp.b1"), vec(C, 0));
        p.set(keys::layer(l, "mlp.w2"), dense(C, C));
        p.set(keys::layer(l, "mlp.b2"), vec(C, 0));
        p.set(keys::layer(l, "attn.wq"), dense(C, C));
        p.set(keys::layer(l, "attn.wk"), dense(C, C));
        p.set(keys::layer(l, "attn.wv"), dense(C, C));
        p.set(keys::layer(l, "attn.wo"), dense(C, C));
        p.set(keys::layer(l, "rpe.w1"), dense(3, C));
        p.set(keys::layer(l, "rpe.b1"), vec(C, 0));
        p.set(keys::layer(l, "rpe.w2"), dense(C, 3 * C));
        p.set(keys::layer(l, "rpe.b2"), vec(3 * C, 0));
    }
    p.set("output_proj.w", dense(C, cfg.frame_dim));
    p.set("output_proj.b", vec(cfg.frame_dim, 0));
    return p;
}

// Bounded, sign-aware, multi-scale embedding of a signed frame distance.
template <typename Real>
inline void embed_distance(long d, int n_max, Real* out3) {
    double ad = double(d < 0 ? -d : d);
    out3[0] = Real(d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
    out3[1] = Real(ad / double(n_max));
    out3[2] = Real(std::log1p(ad) / std::log1p(double(n_max)));
}

// Sinusoidal embedding of the diffusion timestep, C channels.
template <typename Real>
Tensor<Real> timestep_embedding(int t, int channels) {
    int half = channels / 2;
    Tensor<Real> e = Tensor<Real>::zeros({1, std::size_t(channels)});
    for (int i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * double(i) / double(std::max(1, half - 1)));
        e.values[std::size_t(i)] = Real(std::sin(double(t) * freq));
        e.values[std::size_t(half + i)] = Real(std::cos(double(t) * freq));
    }
    return e;
}

// RPE vectors for one (query, key) frame-distance d: three per-head vectors
// (p^Q, p^K, p^V), each head_dim wide. A deterministic function of d alone.
template <typename Real>
struct RpeVectors {
    // indexed [head][0..2], each of length head_dim
    std::vector<std::array<std::vector<Real>, 3>> per_head;
};

namespace detail {

// Runs the RPE network for a batch of unique distances: (U,3) -> (U,3C).
template <typename Real>
typename Graph<Real>::Id build_rpe_table(Graph<Real>& g, const ParamVars<Real>& p, int layer,
                                         const std::vector<long>& unique_d, int n_max) {
    Tensor<Real> emb = Tensor<Real>::zeros({unique_d.size(), 3});
    for (std::size_t i = 0; i < unique_d.size(); ++i)
        embed_distance(unique_d[i], n_max, &emb.values[i * 3]);
    auto h = g.silu(g.add_rowvec(g.matmul(g.constant(std::move(emb)), p.at(keys::layer(layer, "rpe.w1"))),
                                 p.at(keys::layer(layer, "rpe.b1"))));
    return g.add_rowvec(g.matmul(h, p.at(keys::layer(layer, "rpe.w2"))),
                        p.at(keys::layer(layer, "rpe.b2")));
}

}  // namespace detail

template <typename Real>
RpeVectors<Real> rpe(const DenoiserConfig& cfg, const ParamSet<Real>& params, int layer, long d) {
    if (std::labs(d) >= cfg.max_video_len)
        throw ValidationError("rpe: |d| must be below max video length");
    Graph<Real> g;
    ParamVars<Real> vars;
    for (const char* k : {"rpe.w1", "rpe.b1", "rpe.w2", "rpe.b2"})
        vars[keys::layer(layer, k)] = g.constant(params.get(keys::layer(layer, k)));
    auto table = detail::build_rpe_table(g, vars, layer, {d}, cfg.max_video_len);
    const auto& row = g.value(table);
    const int C = cfg.channels, dh = cfg.head_dim();
    RpeVectors<Real> out;
    out.per_head.resize(std::size_t(cfg.heads));
    for (int h = 0; h < cfg.heads; ++h)
        for (int which = 0; which < 3; ++which) {
            auto& v = out.per_head[std::size_t(h)][std::size_t(which)];
            v.resize(std::size_t(dh));
            for (int c = 0; c < dh; ++c) v[std::size_t(c)] = row.values[std::size_t(which * C + h * dh + c)];
        }
    return out;
}

// Temporal attention with relative position encodings:
//   e_ij   = q_i.k_j / sqrt(d_z) + pQ_ij.k_j + q_i.pK_ij
//   z_out_i = z_in_i + W^O [ concat_h sum_j alpha_ij (v_j + pV_ij) ]
// alpha is a row softmax over mask-allowed entries only.
template <typename Real>
typename Graph<Real>::Id build_temporal_attention(Graph<Real>& g, const ParamVars<Real>& p,
                                                  const DenoiserConfig& cfg, int layer,
                                                  typename Graph<Real>::Id z,
                                                  const std::vector<int>& positions,
                                                  const MaskMatrix& mask) {
    const std::size_t kp = g.value(z).rows();
    if (positions.size() != kp) throw ValidationError("attention: positions/input mismatch");
    if (mask.n != kp) throw ValidationError("attention: mask size mismatch");
    for (std::size_t i = 0; i < kp; ++i)
        if (!mask.at(i, i)) throw ValidationError("attention: self must be allowed");

    // unique distance table plus pair -> unique row mapping
    std::vector<long> unique_d;
    std::vector<int> pair_to_unique(kp * kp), idx_i(kp * kp), idx_j(kp * kp);
    {
        std::map<long, int> seen;
        for (std::size_t i = 0; i < kp; ++i)
            for (std::size_t j = 0; j < kp; ++j) {
                long d = long(positions[i]) - long(positions[j]);
                auto it = seen.find(d);
                if (it == seen.end()) {
                    it = seen.emplace(d, int(unique_d.size())).first;
                    unique_d.push_back(d);
                }
                pair_to_unique[i * kp + j] = it->second;
                idx_i[i * kp + j] = int(i);
                idx_j[i * kp + j] = int(j);
            }
    }
    auto rpe_table = detail::build_rpe_table(g, p, layer, unique_d, cfg.max_video_len);
    auto rpe_pairs = g.gather_rows(rpe_table, pair_to_unique);  // (K'^2, 3C)

    const int C = cfg.channels, dh = cfg.head_dim();
    auto q_full = g.matmul(z, p.at(keys::layer(layer, "attn.wq")));
    auto k_full = g.matmul(z, p.at(keys::layer(layer, "attn.wk")));
    auto v_full = g.matmul(z, p.at(keys::layer(layer, "attn.wv")));

    std::vector<typename Graph<Real>::Id> head_outs;
    for (int h = 0; h < cfg.heads; ++h) {
        auto q = g.slice_cols(q_full, std::size_t(h * dh), std::size_t(dh));
        auto k = g.slice_cols(k_full, std::size_t(h * dh), std::size_t(dh));
        auto v = g.slice_cols(v_full, std::size_t(h * dh), std::size_t(dh));
        auto pq = g.slice_cols(rpe_pairs, std::size_t(0 * C + h * dh), std::size_t(dh));
        auto pk = g.slice_cols(rpe_pairs, std::size_t(1 * C + h * dh), std::size_t(dh));
        auto pv = g.slice_cols(rpe_pairs, std::size_t(2 * C + h * dh), std::size_t(dh));

        auto content = g.scale(g.matmul(q, g.transpose(k)), Real(1.0 / std::sqrt(double(dh))));
        auto k_rep = g.gather_rows(k, idx_j);  // (K'^2, dh), row (i,j) holds k_j
        auto q_rep = g.gather_rows(q, idx_i);
        auto e_pos = g.add(g.sum_cols(g.mul(pq, k_rep)), g.sum_cols(g.mul(q_rep, pk)));
        auto e = g.add(content, g.reshape(e_pos, {kp, kp}));

        auto alpha = g.softmax_rows(e, mask);
        auto out_v = g.matmul(alpha, v);
        auto pv_weighted = g.mul_colvec(pv, g.reshape(alpha, {kp * kp}));
        auto out_pv = g.sum_row_groups(pv_weighted, kp);
        head_outs.push_back(g.add(out_v, out_pv));
    }
    auto merged = cfg.heads == 1 ? head_outs[0] : g.concat_cols(head_outs);
    return g.add(z, g.matmul(merged, p.at(keys::layer(layer, "attn.wo"))));
}

// epsilon_theta: noisy latents x_t (|X|, F) and observed frames y (|Y|, F)
// in, predicted noise for the latent rows out.
template <typename Real>
typename Graph<Real>::Id build_epsilon_theta(Graph<Real>& g, const ParamVars<Real>& p,
                                             const DenoiserConfig& cfg,
                                             typename Graph<Real>::Id x_t,
                                             typename Graph<Real>::Id y,  // -1 when |Y| = 0
                                             int t, const std::vector<int>& latent_pos,
                                             const std::vector<int>& observed_pos,
                                             const MaskMatrix& cross_video_mask) {
    const std::size_t nx = g.value(x_t).rows();
    const std::size_t ny = y >= 0 ? g.value(y).rows() : 0;
    const std::size_t kp = nx + ny;
    if (nx == 0) throw ValidationError("epsilon_theta: latent set must be non-empty");
    if (latent_pos.size() != nx || observed_pos.size() != ny)
        throw ValidationError("epsilon_theta: position vectors do not match frame counts");
    if (int(kp) > cfg.max_frames)
        throw ValidationError("epsilon_theta: |X|+|Y| exceeds K=" + std::to_string(cfg.max_frames));

    std::vector<int> positions = latent_pos;
    positions.insert(positions.end(), observed_pos.begin(), observed_pos.end());
    for (int pos : positions)
        if (pos < 0 || pos >= cfg.max_video_len)
            throw ValidationError("epsilon_theta: frame position out of [0, N_max)");
    // distinctness within one video's slice: same-group entries may not repeat
    for (std::size_t i = 0; i < kp; ++i)
        for (std::size_t j = i + 1; j < kp; ++j)
            if (cross_video_mask.at(i, j) && positions[i] == positions[j])
                throw ValidationError("epsilon_theta: duplicate frame position within a video");

    // observed-indicator channel: ones for observed rows, zeros for latent
    Tensor<Real> ind = Tensor<Real>::zeros({kp, 1});
    for (std::size_t i = nx; i < kp; ++i) ind.values[i] = Real(1);
    auto frames = y >= 0 ? g.concat_rows({x_t, y}) : x_t;
    auto inp = g.concat_cols({frames, g.constant(std::move(ind))});

    auto h = g.add_rowvec(g.matmul(inp, p.at("input_proj.w")), p.at("input_proj.b"));
    auto temb = g.add_rowvec(g.matmul(g.constant(timestep_embedding<Real>(t, cfg.channels)),
                                      p.at("time_embed.w")),
                             p.at("time_embed.b"));
    h = g.add_rowvec(h, g.reshape(temb, {std::size_t(cfg.channels)}));

    for (int l = 0; l < cfg.blocks; ++l) {
        auto u = g.layer_norm(h, p.at(keys::layer(l, "norm.gain")), p.at(keys::layer(l, "norm.bias")));
        u = g.silu(g.add_rowvec(g.matmul(u, p.at(keys::layer(l, "mlp.w1"))), p.at(keys::layer(l, "mlp.b1"))));
        u = g.add_rowvec(g.matmul(u, p.at(keys::layer(l, "mlp.w2"))), p.at(keys::layer(l, "mlp.b2")));
        h = g.add(h, u);
        h = build_temporal_attention(g, p, cfg, l, h, positions, cross_video_mask);
    }
    auto out = g.add_rowvec(g.matmul(h, p.at("output_proj.w")), p.at("output_proj.b"));
    std::vector<int> latent_rows(nx);
    for (std::size_t i = 0; i < nx; ++i) latent_rows[i] = int(i);
    return g.gather_rows(out, latent_rows);
}

// Forward-only evaluation (params enter as constants, so backward never runs).
template <typename Real>
Tensor<Real> eval_epsilon_theta(const DenoiserConfig& cfg, const ParamSet<Real>& params,
                                const Tensor<Real>& x_t, const Tensor<Real>& y, int t,
                                const std::vector<int>& latent_pos,
                                const std::vector<int>& observed_pos,
                                const MaskMatrix& cross_video_mask) {
    Graph<Real> g;
    ParamVars<Real> vars;
    for (const auto& [name, tensor] : params) vars[name] = g.constant(tensor);
    auto xid = g.constant(x_t);
    auto yid = y.numel() > 0 ? g.constant(y) : typename Graph<Real>::Id(-1);
    auto out = build_epsilon_theta(g, vars, cfg, xid, yid, t, latent_pos, observed_pos,
                                   cross_video_mask);
    return g.value(out);
}

template <typename Real>
Tensor<Real> eval_epsilon_theta(const DenoiserConfig& cfg, const ParamSet<Real>& params,
                                const Tensor<Real>& x_t, const Tensor<Real>& y, int t,
                                const std::vector<int>& latent_pos,
                                const std::vector<int>& observed_pos) {
    return eval_epsilon_theta(cfg, params, x_t, y, t, latent_pos, observed_pos,
                              MaskMatrix::all_true(x_t.rows() + (y.numel() ? y.rows() : 0)));
}

// ---- training batch padding ----

template <typename Real>
struct TrainExample {
    Tensor<Real> x0;  // (|X|, F) clean latent frames
    Tensor<Real> y;   // (|Y|, F) observed frames
    std::vector<int> latents;   // X
    std::vector<int> observed;  // Y
};

// One K-slot batch entry. Latent rows are [own video's X | filler video's
// frames]; the mask keeps the two videos from attending to each other. The
// filler frames are extra denoising targets, so they carry their own x0 rows.
template <typename Real>
struct PaddedExample {
    Tensor<Real> x0;            // (|X| + pad, F)
    Tensor<Real> y;             // (|Y|, F)
    std::vector<int> latents;   // X then filler positions
    std::vector<int> observed;  // Y
    MaskMatrix mask;            // (K', K') over [latents | observed]
    std::size_t own_latents = 0;
};

// Supplies n distinct frames (with their true positions) from one video.
template <typename Real>
using FillerSource = std::function<std::pair<Tensor<Real>, std::vector<int>>(int n, Rng&)>;

template <typename Real>
PaddedExample<Real> pad_example(const TrainExample<Real>& ex, const FillerSource<Real>& filler,
                                int K, Rng& rng) {
    const std::size_t nx = ex.latents.size(), ny = ex.observed.size();
    if (nx == 0) throw ValidationError("pad_example: empty latent set");
    if (int(nx + ny) > K) throw ValidationError("pad_example: example exceeds K frames");
    PaddedExample<Real> out;
    out.own_latents = nx;
    out.observed = ex.observed;
    out.y = ex.y;
    out.latents = ex.latents;

    int pad = K - int(nx + ny);
    Tensor<Real> pad_frames;
    std::vector<int> pad_pos;
    if (pad > 0) {
        if (!filler) throw ValidationError("pad_example: empty filler source");
        std::tie(pad_frames, pad_pos) = filler(pad, rng);
        if (int(pad_pos.size()) != pad || pad_frames.rows() != std::size_t(pad))
            throw ValidationError("pad_example: filler returned wrong frame count");
        out.latents.insert(out.latents.end(), pad_pos.begin(), pad_pos.end());
    }

    // joint order [X | filler | Y]; group 0 = own video, group 1 = filler
    std::vector<int> group(std::size_t(K), 0);
    for (std::size_t i = nx; i < nx + std::size_t(pad); ++i) group[i] = 1;
    for (std::size_t i = nx + std::size_t(pad); i < std::size_t(K); ++i) group[i] = 0;
    out.mask = MaskMatrix::from_groups(group);

    out.x0 = Tensor<Real>::zeros({nx + std::size_t(pad), std::size_t(ex.x0.cols())});
    std::copy(ex.x0.values.begin(), ex.x0.values.end(), out.x0.values.begin());
    if (pad > 0)
        std::copy(pad_frames.values.begin(), pad_frames.values.end(),
                  out.x0.values.begin() + std::ptrdiff_t(nx * ex.x0.cols()));
    return out;
}

template <typename Real>
std::vector<PaddedExample<Real>> pad_batch(const std::vector<TrainExample<Real>>& examples,
                                           const FillerSource<Real>& filler, int K, Rng& rng) {
    std::vector<PaddedExample<Real>> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) out.push_back(pad_example(ex, filler, K, rng));
    return out;
}

}  // namespace fdm
