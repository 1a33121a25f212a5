#pragma once

// Synthetic long-range-dependency datasets (a grid-town driving analog and a
// colored-rooms analog) plus the evaluation metrics: lag-based speed
// estimates, outlier percentage, 1-Wasserstein distance, a Gaussian Frechet
// distance over handcrafted features, and revisit color accuracy.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "fdm/rng.hpp"
#include "fdm/tensor.hpp"
#include "fdm/video.hpp"

namespace fdm {

constexpr double kFps = 10.0;  // lag 10 spans one second

// ---- TownDrive ----
// A point agent walks a grid-graph town (nodes spaced kStreetSpacing apart)
// toward random waypoints at up to v_max units/s, pausing at light nodes.
// Frames are raw (x, y) positions, so decoding position is the identity.

constexpr double kStreetSpacing = 3.0;

struct TownDriveParams {
    int grid_size = 8;
    double v_max = 3.0;
    double light_density = 0.2;
};

inline Dataset gen_town_drive(int count, int n_frames, const TownDriveParams& params, Rng& rng) {
    if (count < 1) throw ValidationError("town-drive: count must be positive");
    if (n_frames < 20) throw ValidationError("town-drive: need N >= 20");
    if (params.grid_size < 2) throw ValidationError("town-drive: grid too small");
    const int g = params.grid_size;

    Dataset ds;
    ds.meta["generator"] = "town-drive";
    ds.meta["grid_size"] = std::to_string(g);
    ds.meta["v_max"] = std::to_string(params.v_max);
    ds.meta["light_density"] = std::to_string(params.light_density);
    ds.videos.reserve(std::size_t(count));

    for (int v = 0; v < count; ++v) {
        Rng r = rng.split(std::uint64_t(v));
        std::vector<std::uint8_t> light(std::size_t(g) * std::size_t(g));
        for (auto& l : light) l = r.bernoulli(params.light_density) ? 1 : 0;

        VideoTensor video = VideoTensor::zeros(n_frames, 2);
        int node_x = int(r.uniform_int(0, g - 1));
        int node_y = int(r.uniform_int(0, g - 1));
        int goal_x = node_x, goal_y = node_y;
        double x = node_x * kStreetSpacing, y = node_y * kStreetSpacing;
        int next_x = node_x, next_y = node_y;  // node being approached
        bool at_node = true;
        int pause = 0;
        double cruise = params.v_max * r.uniform(0.5, 1.0);
        double step = cruise / kFps;

        for (int f = 0; f < n_frames; ++f) {
            video.frame(f)[0] = float(x);
            video.frame(f)[1] = float(y);

            if (pause > 0) {
                --pause;
                continue;
            }
            if (at_node) {
                if (node_x == goal_x && node_y == goal_y) {
                    while (goal_x == node_x && goal_y == node_y) {
                        goal_x = int(r.uniform_int(0, g - 1));
                        goal_y = int(r.uniform_int(0, g - 1));
                    }
                }
                // step toward the waypoint along one axis; pick randomly when
                // both reduce the Manhattan distance
                bool move_x = node_x != goal_x && (node_y == goal_y || r.bernoulli(0.5));
                next_x = node_x + (move_x ? (goal_x > node_x ? 1 : -1) : 0);
                next_y = node_y + (move_x ? 0 : (goal_y > node_y ? 1 : -1));
                at_node = false;
            }
            double tx = next_x * kStreetSpacing, ty = next_y * kStreetSpacing;
            double dx = tx - x, dy = ty - y;
            double dist = std::sqrt(dx * dx + dy * dy);
            if (dist <= step) {
                x = tx;
                y = ty;
                node_x = next_x;
                node_y = next_y;
                at_node = true;
                if (light[std::size_t(node_y) * std::size_t(g) + std::size_t(node_x)])
                    pause = int(r.uniform_int(5, 25));
            } else {
                x += step * dx / dist;
                y += step * dy / dist;
            }
        }
        ds.videos.push_back(std::move(video));
    }
    return ds;
}

// ---- ColoredRooms ----
// Rooms on a cycle; each room keeps one palette color for the whole video.
// Frame layout: [room one-hot | room color value | within-visit phase].

struct ColoredRoomsParams {
    int n_rooms = 4;
    int palette_size = 6;
};

inline Dataset gen_colored_rooms(int count, int n_frames, const ColoredRoomsParams& params,
                                 Rng& rng) {
    if (count < 1) throw ValidationError("colored-rooms: count must be positive");
    if (n_frames < 2) throw ValidationError("colored-rooms: need N >= 2");
    if (params.palette_size < 2) throw ValidationError("colored-rooms: palette must have >= 2 colors");
    if (params.n_rooms < 2) throw ValidationError("colored-rooms: need >= 2 rooms");
    const int rooms = params.n_rooms;
    const int dim = rooms + 2;

    Dataset ds;
    ds.meta["generator"] = "colored-rooms";
    ds.meta["n_rooms"] = std::to_string(rooms);
    ds.meta["palette_size"] = std::to_string(params.palette_size);
    ds.videos.reserve(std::size_t(count));

    for (int v = 0; v < count; ++v) {
        Rng r = rng.split(std::uint64_t(v));
        std::vector<int> palette(static_cast<std::size_t>(rooms));
        for (auto& c : palette) c = int(r.uniform_int(0, params.palette_size - 1));

        VideoTensor video = VideoTensor::zeros(n_frames, dim);
        int room = int(r.uniform_int(0, rooms - 1));
        int stay = int(r.uniform_int(3, 8));
        int in_room = 0;
        for (int f = 0; f < n_frames; ++f) {
            float* fr = video.frame(f);
            fr[room] = 1.0f;
            fr[rooms] = float(palette[std::size_t(room)]);
            fr[rooms + 1] = float(in_room) / float(stay);
            ++in_room;
            if (in_room >= stay) {
                room = (room + rooms + (r.bernoulli(0.5) ? 1 : -1)) % rooms;
                stay = int(r.uniform_int(3, 8));
                in_room = 0;
            }
        }
        ds.videos.push_back(std::move(video));
    }
    return ds;
}

// ---- speed metrics ----

// speed_i = |pos_{i+lag} - pos_i| / (lag / fps), positions from channels 0..1.
inline std::vector<double> estimate_speeds(const VideoTensor& video, int lag = 10,
                                           double fps = kFps) {
    if (video.n_frames <= lag) throw ValidationError("estimate_speeds: video shorter than lag");
    if (video.frame_dim < 2) throw ValidationError("estimate_speeds: need 2 position channels");
    std::vector<double> speeds;
    speeds.reserve(std::size_t(video.n_frames - lag));
    double dt = double(lag) / fps;
    for (int i = 0; i + lag < video.n_frames; ++i) {
        double dx = double(video.frame(i + lag)[0]) - double(video.frame(i)[0]);
        double dy = double(video.frame(i + lag)[1]) - double(video.frame(i)[1]);
        speeds.push_back(std::sqrt(dx * dx + dy * dy) / dt);
    }
    return speeds;
}

inline double outlier_pct(const std::vector<double>& speeds, double threshold = 10.0) {
    if (speeds.empty()) throw ValidationError("outlier_pct: empty input");
    std::size_t over = 0;
    for (double s : speeds)
        if (s > threshold) ++over;
    return 100.0 * double(over) / double(speeds.size());
}

inline std::vector<double> filter_outliers(const std::vector<double>& speeds, double threshold) {
    std::vector<double> out;
    for (double s : speeds)
        if (s <= threshold) out.push_back(s);
    return out;
}

// ---- 1-Wasserstein distance between empirical distributions ----
// Piecewise quantile-function integral; handles unequal sample counts.

inline double wasserstein1d(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw ValidationError("wasserstein1d: empty input");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = double(a.size()), nb = double(b.size());
    double total = 0.0, q = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        double qa = double(i + 1) / na;
        double qb = double(j + 1) / nb;
        double q_next = std::min(qa, qb);
        total += (q_next - q) * std::abs(a[i] - b[j]);
        q = q_next;
        if (qa <= q_next + 1e-18) ++i;
        if (qb <= q_next + 1e-18) ++j;
    }
    return total;
}

// ---- Gaussian Frechet distance over handcrafted per-video features ----

// (mean speed, speed variance, net displacement, per-channel mean/variance)
inline std::vector<double> video_features(const VideoTensor& video, int lag = 10) {
    std::vector<double> f;
    auto speeds = estimate_speeds(video, lag);
    double ms = 0;
    for (double s : speeds) ms += s;
    ms /= double(speeds.size());
    double vs = 0;
    for (double s : speeds) vs += (s - ms) * (s - ms);
    vs /= std::max(1.0, double(speeds.size()) - 1.0);
    f.push_back(ms);
    f.push_back(vs);
    double dx = double(video.frame(video.n_frames - 1)[0]) - double(video.frame(0)[0]);
    double dy = double(video.frame(video.n_frames - 1)[1]) - double(video.frame(0)[1]);
    f.push_back(std::sqrt(dx * dx + dy * dy));
    for (int c = 0; c < video.frame_dim; ++c) {
        double mean = 0;
        for (int i = 0; i < video.n_frames; ++i) mean += double(video.frame(i)[c]);
        mean /= double(video.n_frames);
        double var = 0;
        for (int i = 0; i < video.n_frames; ++i) {
            double d = double(video.frame(i)[c]) - mean;
            var += d * d;
        }
        var /= double(video.n_frames - 1);
        f.push_back(mean);
        f.push_back(var);
    }
    return f;
}

namespace detail {

// Cyclic Jacobi eigendecomposition of a symmetric matrix (small dimensions).
inline void jacobi_eigen(std::vector<double>& m, int n, std::vector<double>& eigvals,
                         std::vector<double>& eigvecs) {
    eigvecs.assign(std::size_t(n) * std::size_t(n), 0.0);
    for (int i = 0; i < n; ++i) eigvecs[std::size_t(i) * std::size_t(n) + std::size_t(i)] = 1.0;
    auto at = [&m, n](int r, int c) -> double& { return m[std::size_t(r) * std::size_t(n) + std::size_t(c)]; };
    auto vat = [&eigvecs, n](int r, int c) -> double& {
        return eigvecs[std::size_t(r) * std::size_t(n) + std::size_t(c)];
    };
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += at(p, q) * at(p, q);
        if (off < 1e-24) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(at(p, q)) < 1e-300) continue;
                double theta = (at(q, q) - at(p, p)) / (2.0 * at(p, q));
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - s * akq;
                    at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - s * aqk;
                    at(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    double vkp = vat(k, p), vkq = vat(k, q);
                    vat(k, p) = c * vkp - s * vkq;
                    vat(k, q) = s * vkp + c * vkq;
                }
            }
    }
    eigvals.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) eigvals[std::size_t(i)] = at(i, i);
}

// Symmetric PSD square root via eigendecomposition; negative eigenvalues from
// roundoff clamp to zero.
inline std::vector<double> sym_sqrt(std::vector<double> m, int n) {
    std::vector<double> vals, vecs;
    jacobi_eigen(m, n, vals, vecs);
    std::vector<double> out(std::size_t(n) * std::size_t(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0;
            for (int k = 0; k < n; ++k) {
                double lam = vals[std::size_t(k)] > 0 ? std::sqrt(vals[std::size_t(k)]) : 0.0;
                s += vecs[std::size_t(i) * std::size_t(n) + std::size_t(k)] * lam *
                     vecs[std::size_t(j) * std::size_t(n) + std::size_t(k)];
            }
            out[std::size_t(i) * std::size_t(n) + std::size_t(j)] = s;
        }
    return out;
}

inline std::vector<double> mat_mul(const std::vector<double>& a, const std::vector<double>& b,
                                   int n) {
    std::vector<double> out(std::size_t(n) * std::size_t(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            double aik = a[std::size_t(i) * std::size_t(n) + std::size_t(k)];
            for (int j = 0; j < n; ++j)
                out[std::size_t(i) * std::size_t(n) + std::size_t(j)] +=
                    aik * b[std::size_t(k) * std::size_t(n) + std::size_t(j)];
        }
    return out;
}

}  // namespace detail

// ||mu1 - mu2||^2 + tr(S1 + S2 - 2 (S1 S2)^{1/2}), Gaussians fitted with
// sample covariance and a 1e-6 ridge.
inline double frechet_gaussian(const std::vector<std::vector<double>>& feats_a,
                               const std::vector<std::vector<double>>& feats_b,
                               double ridge = 1e-6) {
    if (feats_a.size() < 2 || feats_b.size() < 2)
        throw ValidationError("frechet_gaussian: need at least 2 feature vectors per side");
    const int d = int(feats_a[0].size());
    for (const auto* side : {&feats_a, &feats_b})
        for (const auto& f : *side)
            if (int(f.size()) != d) throw ValidationError("frechet_gaussian: ragged features");

    auto fit = [d](const std::vector<std::vector<double>>& feats, std::vector<double>& mu,
                   std::vector<double>& cov) {
        const double n = double(feats.size());
        mu.assign(std::size_t(d), 0.0);
        for (const auto& f : feats)
            for (int i = 0; i < d; ++i) mu[std::size_t(i)] += f[std::size_t(i)];
        for (auto& v : mu) v /= n;
        cov.assign(std::size_t(d) * std::size_t(d), 0.0);
        for (const auto& f : feats)
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    cov[std::size_t(i) * std::size_t(d) + std::size_t(j)] +=
                        (f[std::size_t(i)] - mu[std::size_t(i)]) * (f[std::size_t(j)] - mu[std::size_t(j)]);
        for (auto& v : cov) v /= (n - 1.0);
    };
    std::vector<double> mu1, mu2, s1, s2;
    fit(feats_a, mu1, s1);
    fit(feats_b, mu2, s2);
    for (int i = 0; i < d; ++i) {
        s1[std::size_t(i) * std::size_t(d) + std::size_t(i)] += ridge;
        s2[std::size_t(i) * std::size_t(d) + std::size_t(i)] += ridge;
    }

    double mean_term = 0;
    for (int i = 0; i < d; ++i) {
        double diff = mu1[std::size_t(i)] - mu2[std::size_t(i)];
        mean_term += diff * diff;
    }
    // tr((S1 S2)^{1/2}) computed from the symmetrized product R S2 R with
    // R = S1^{1/2}
    auto r = detail::sym_sqrt(s1, d);
    auto inner = detail::mat_mul(detail::mat_mul(r, s2, d), r, d);
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            double sym = 0.5 * (inner[std::size_t(i) * std::size_t(d) + std::size_t(j)] +
                                inner[std::size_t(j) * std::size_t(d) + std::size_t(i)]);
            inner[std::size_t(i) * std::size_t(d) + std::size_t(j)] = sym;
            inner[std::size_t(j) * std::size_t(d) + std::size_t(i)] = sym;
        }
    auto root = detail::sym_sqrt(inner, d);
    double trace_term = 0;
    for (int i = 0; i < d; ++i)
        trace_term += s1[std::size_t(i) * std::size_t(d) + std::size_t(i)] +
                      s2[std::size_t(i) * std::size_t(d) + std::size_t(i)] -
                      2.0 * root[std::size_t(i) * std::size_t(d) + std::size_t(i)];
    return mean_term + trace_term;
}

// ---- colored-rooms revisit accuracy ----

// Fraction of frames whose decoded color matches the color established for
// that room at its first occurrence (observed prefix counts first), within
// half a palette unit.
inline double color_accuracy(const VideoTensor& video, int n_rooms, double tolerance = 0.5) {
    if (video.frame_dim < n_rooms + 2) throw ValidationError("color_accuracy: frame too narrow");
    std::vector<double> established(std::size_t(n_rooms),
                                    std::numeric_limits<double>::quiet_NaN());
    int match = 0;
    for (int f = 0; f < video.n_frames; ++f) {
        const float* fr = video.frame(f);
        int room = 0;
        for (int rIdx = 1; rIdx < n_rooms; ++rIdx)
            if (fr[rIdx] > fr[room]) room = rIdx;
        double color = double(fr[n_rooms]);
        if (std::isnan(established[std::size_t(room)])) {
            established[std::size_t(room)] = color;
            ++match;
        } else if (std::abs(color - established[std::size_t(room)]) <= tolerance) {
            ++match;
        }
    }
    return double(match) / double(video.n_frames);
}

// ---- histogram helper (uniform bins over [0, hi]) ----

struct Histogram {
    double lo = 0, hi = 1;
    std::vector<long> counts;
};

inline Histogram make_histogram(const std::vector<double>& values, double lo, double hi,
                                int bins = 50) {
    if (bins < 1 || !(hi > lo)) throw ValidationError("histogram: bad range");
    Histogram h;
    h.lo = lo;
    h.hi = hi;
    h.counts.assign(std::size_t(bins), 0);
    for (double v : values) {
        if (v < lo || v > hi) continue;
        int b = std::min(bins - 1, int((v - lo) / (hi - lo) * bins));
        h.counts[std::size_t(b)]++;
    }
    return h;
}

}  // namespace fdm
