#pragma once

// Videos as N x frame_dim float tensors with an observed mask, datasets of
// uniform videos, and the FDMV binary container with its key=value metadata
// sidecar.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fdm/param_set.hpp"  // shared little-endian helpers
#include "fdm/tensor.hpp"

namespace fdm {

struct VideoTensor {
    int n_frames = 0;
    int frame_dim = 0;
    std::vector<float> frames;          // row-major (n_frames, frame_dim)
    std::vector<std::uint8_t> observed;  // length n_frames

    static VideoTensor zeros(int n, int dim) {
        VideoTensor v;
        v.n_frames = n;
        v.frame_dim = dim;
        v.frames.assign(std::size_t(n) * std::size_t(dim), 0.0f);
        v.observed.assign(std::size_t(n), 0);
        return v;
    }

    float* frame(int i) { return frames.data() + std::size_t(i) * std::size_t(frame_dim); }
    const float* frame(int i) const { return frames.data() + std::size_t(i) * std::size_t(frame_dim); }

    void mark_observed_prefix(int n_obs) {
        for (int i = 0; i < n_obs && i < n_frames; ++i) observed[std::size_t(i)] = 1;
    }

    template <typename Real>
    Tensor<Real> gather(const std::vector<int>& idx) const {
        Tensor<Real> out = Tensor<Real>::zeros({idx.size(), std::size_t(frame_dim)});
        for (std::size_t r = 0; r < idx.size(); ++r) {
            if (idx[r] < 0 || idx[r] >= n_frames)
                throw ValidationError("video gather: index out of range");
            const float* src = frame(idx[r]);
            for (int c = 0; c < frame_dim; ++c) out.values[r * std::size_t(frame_dim) + std::size_t(c)] = Real(src[c]);
        }
        return out;
    }

    template <typename Real>
    void scatter(const std::vector<int>& idx, const Tensor<Real>& rows) {
        if (rows.rows() != idx.size() || int(rows.cols()) != frame_dim)
            throw ValidationError("video scatter: shape mismatch");
        for (std::size_t r = 0; r < idx.size(); ++r) {
            float* dst = frame(idx[r]);
            for (int c = 0; c < frame_dim; ++c) dst[c] = float(rows.values[r * std::size_t(frame_dim) + std::size_t(c)]);
        }
    }

    bool all_finite() const {
        for (float v : frames)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

using Metadata = std::map<std::string, std::string>;

struct Dataset {
    std::vector<VideoTensor> videos;
    Metadata meta;

    int n_frames() const { return videos.empty() ? 0 : videos[0].n_frames; }
    int frame_dim() const { return videos.empty() ? 0 : videos[0].frame_dim; }
};

// ---- FDMV container ----
// magic "FDMV", version u32, num_videos u32, N u32, frame_dim u32,
// then f32 LE values, video-major.

constexpr std::uint32_t kDatasetVersion = 1;

inline void save_dataset(std::ostream& os, const Dataset& ds) {
    os.write("FDMV", 4);
    detail::write_u32(os, kDatasetVersion);
    detail::write_u32(os, std::uint32_t(ds.videos.size()));
    detail::write_u32(os, std::uint32_t(ds.n_frames()));
    detail::write_u32(os, std::uint32_t(ds.frame_dim()));
    for (const auto& v : ds.videos) {
        if (v.n_frames != ds.n_frames() || v.frame_dim != ds.frame_dim())
            throw ValidationError("dataset: videos must share (N, frame_dim)");
        for (float x : v.frames) detail::write_f32(os, x);
    }
}

inline Dataset load_dataset_stream(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "FDMV", 4) != 0) throw ValidationError("dataset: bad magic");
    std::uint32_t version = detail::read_u32(is);
    if (version != kDatasetVersion)
        throw ValidationError("dataset: unsupported version " + std::to_string(version));
    std::uint32_t count = detail::read_u32(is);
    std::uint32_t n = detail::read_u32(is);
    std::uint32_t dim = detail::read_u32(is);
    Dataset ds;
    ds.videos.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        VideoTensor v = VideoTensor::zeros(int(n), int(dim));
        for (auto& x : v.frames) x = detail::read_f32(is);
        if (!is) throw ValidationError("dataset: truncated file");
        ds.videos.push_back(std::move(v));
    }
    return ds;
}

inline void save_metadata(const std::string& path, const Metadata& meta) {
    std::ofstream os(path);
    if (!os) throw ValidationError("metadata: cannot open for writing: " + path);
    for (const auto& [k, v] : meta) os << k << "=" << v << "\n";
}

inline Metadata load_metadata(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("metadata: cannot open: " + path);
    Metadata meta;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ValidationError("metadata: malformed line: " + line);
        meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return meta;
}

// ---- per-channel standardization ----
// Models train in normalized space; completions are mapped back to data
// units before metrics run. Factors persist in checkpoints as norm.mean /
// norm.std.

struct FrameNorm {
    std::vector<float> mean, stdev;  // per channel
};

inline FrameNorm compute_frame_norm(const std::vector<VideoTensor>& videos) {
    if (videos.empty()) throw ValidationError("norm: empty dataset");
    const int dim = videos[0].frame_dim;
    FrameNorm norm;
    norm.mean.assign(std::size_t(dim), 0.0f);
    norm.stdev.assign(std::size_t(dim), 1.0f);
    std::vector<double> sum(std::size_t(dim), 0.0), sumsq(std::size_t(dim), 0.0);
    double count = 0;
    for (const auto& v : videos) {
        for (int f = 0; f < v.n_frames; ++f)
            for (int c = 0; c < dim; ++c) {
                double x = double(v.frame(f)[c]);
                sum[std::size_t(c)] += x;
                sumsq[std::size_t(c)] += x * x;
            }
        count += double(v.n_frames);
    }
    for (int c = 0; c < dim; ++c) {
        double mean = sum[std::size_t(c)] / count;
        double var = sumsq[std::size_t(c)] / count - mean * mean;
        norm.mean[std::size_t(c)] = float(mean);
        norm.stdev[std::size_t(c)] = float(std::sqrt(std::max(var, 1e-12)));
    }
    return norm;
}

inline void normalize_video(VideoTensor& v, const FrameNorm& norm) {
    for (int f = 0; f < v.n_frames; ++f)
        for (int c = 0; c < v.frame_dim; ++c)
            v.frame(f)[c] = (v.frame(f)[c] - norm.mean[std::size_t(c)]) / norm.stdev[std::size_t(c)];
}

inline void denormalize_video(VideoTensor& v, const FrameNorm& norm) {
    for (int f = 0; f < v.n_frames; ++f)
        for (int c = 0; c < v.frame_dim; ++c)
            v.frame(f)[c] = v.frame(f)[c] * norm.stdev[std::size_t(c)] + norm.mean[std::size_t(c)];
}

inline void save_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("dataset: cannot open for writing: " + path);
    save_dataset(os, ds);
    if (!ds.meta.empty()) save_metadata(path + ".meta", ds.meta);
}

inline Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("dataset: cannot open: " + path);
    Dataset ds = load_dataset_stream(is);
    std::ifstream meta(path + ".meta");
    if (meta) {
        meta.close();
        ds.meta = load_metadata(path + ".meta");
    }
    return ds;
}

}  // namespace fdm
