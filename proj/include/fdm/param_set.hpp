#pragma once

// Named parameter collections, reverse-mode gradients over them, a
// finite-difference gradient checker, and the FDMP checkpoint container.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <utility>

#include "fdm/graph.hpp"
#include "fdm/tensor.hpp"

namespace fdm {

// std::map keeps iteration order deterministic (lexicographic by name).
template <typename Real>
class ParamSet {
public:
    using Map = std::map<std::string, Tensor<Real>>;

    void set(const std::string& name, Tensor<Real> t) { params_[name] = std::move(t); }

    const Tensor<Real>& get(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw ValidationError("param not found: " + name);
        return it->second;
    }
    Tensor<Real>& get(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw ValidationError("param not found: " + name);
        return it->second;
    }

    bool contains(const std::string& name) const { return params_.count(name) != 0; }
    std::size_t size() const { return params_.size(); }
    bool empty() const { return params_.empty(); }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    bool same_layout(const ParamSet& other) const {
        if (params_.size() != other.params_.size()) return false;
        auto a = params_.begin();
        auto b = other.params_.begin();
        for (; a != params_.end(); ++a, ++b)
            if (a->first != b->first || a->second.shape != b->second.shape) return false;
        return true;
    }

    template <typename Other>
    ParamSet<Other> cast() const {
        ParamSet<Other> out;
        for (const auto& [name, t] : params_) out.set(name, t.template cast<Other>());
        return out;
    }

private:
    Map params_;
};

template <typename Real>
using ParamVars = std::map<std::string, typename Graph<Real>::Id>;

// A loss is any scalar-valued composition of graph ops over the parameters.
template <typename Real>
using LossBuilder = std::function<typename Graph<Real>::Id(Graph<Real>&, const ParamVars<Real>&)>;

template <typename Real>
struct GradResult {
    Real loss;
    ParamSet<Real> grads;  // same key set and shapes as the input params
};

template <typename Real>
ParamVars<Real> insert_params(Graph<Real>& g, const ParamSet<Real>& params) {
    ParamVars<Real> vars;
    for (const auto& [name, t] : params) vars[name] = g.input(t);
    return vars;
}

template <typename Real>
GradResult<Real> grad(const LossBuilder<Real>& loss_fn, const ParamSet<Real>& params) {
    Graph<Real> g;
    ParamVars<Real> vars = insert_params(g, params);
    auto loss = loss_fn(g, vars);
    if (g.value(loss).numel() != 1)
        throw ValidationError("grad: loss must be scalar, got shape " + shape_str(g.value(loss).shape));
    g.backward(loss);
    GradResult<Real> out;
    out.loss = g.value_scalar(loss);
    for (const auto& [name, t] : params) {
        Tensor<Real> gt = g.grad(vars.at(name));
        if (!gt.all_finite()) throw NumericalError("grad: non-finite gradient for " + name);
        out.grads.set(name, std::move(gt));
    }
    if (!std::isfinite(double(out.loss))) throw NumericalError("grad: non-finite loss");
    return out;
}

template <typename Real>
Real eval_loss(const LossBuilder<Real>& loss_fn, const ParamSet<Real>& params) {
    Graph<Real> g;
    ParamVars<Real> vars = insert_params(g, params);
    return g.value_scalar(loss_fn(g, vars));
}

// max over parameter elements of |analytic - central difference| / max(1, |central difference|)
inline double grad_check(const LossBuilder<double>& loss_fn, const ParamSet<double>& params,
                         double eps = 1e-5) {
    GradResult<double> analytic = grad(loss_fn, params);
    double max_rel = 0.0;
    ParamSet<double> work = params;
    for (const auto& [name, t] : params) {
        for (std::size_t i = 0; i < t.numel(); ++i) {
            auto& slot = work.get(name).values[i];
            double orig = slot;
            slot = orig + eps;
            double fp = eval_loss(loss_fn, work);
            slot = orig - eps;
            double fm = eval_loss(loss_fn, work);
            slot = orig;
            double numeric = (fp - fm) / (2.0 * eps);
            double a = analytic.grads.get(name).values[i];
            double rel = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

// ---- FDMP checkpoint container ----
// magic "FDMP", version u32, count u32, then per parameter:
// name length u32, name bytes, rank u32, extents u32 each, f32 LE values.

namespace detail {
inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    os.write(reinterpret_cast<const char*>(b), 4);
}
inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw ValidationError("checkpoint: truncated file");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}
inline void write_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(os, bits);
}
inline float read_f32(std::istream& is) {
    std::uint32_t bits = read_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}
}  // namespace detail

constexpr std::uint32_t kCheckpointVersion = 1;

template <typename Real>
void save_checkpoint(std::ostream& os, const ParamSet<Real>& params) {
    os.write("FDMP", 4);
    detail::write_u32(os, kCheckpointVersion);
    detail::write_u32(os, std::uint32_t(params.size()));
    for (const auto& [name, t] : params) {
        detail::write_u32(os, std::uint32_t(name.size()));
        os.write(name.data(), std::streamsize(name.size()));
        detail::write_u32(os, std::uint32_t(t.rank()));
        for (std::size_t e : t.shape) detail::write_u32(os, std::uint32_t(e));
        for (Real v : t.values) detail::write_f32(os, float(v));
    }
}

template <typename Real>
void save_checkpoint(const std::string& path, const ParamSet<Real>& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("checkpoint: cannot open for writing: " + path);
    save_checkpoint(os, params);
}

template <typename Real = float>
ParamSet<Real> load_checkpoint(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "FDMP", 4) != 0)
        throw ValidationError("checkpoint: bad magic");
    std::uint32_t version = detail::read_u32(is);
    if (version != kCheckpointVersion)
        throw ValidationError("checkpoint: unsupported version " + std::to_string(version));
    std::uint32_t count = detail::read_u32(is);
    ParamSet<Real> params;
    for (std::uint32_t p = 0; p < count; ++p) {
        std::uint32_t name_len = detail::read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        std::uint32_t rank = detail::read_u32(is);
        Shape shape(rank);
        for (auto& e : shape) e = detail::read_u32(is);
        Tensor<Real> t = Tensor<Real>::zeros(shape);
        for (auto& v : t.values) v = Real(detail::read_f32(is));
        if (!is) throw ValidationError("checkpoint: truncated file");
        params.set(name, std::move(t));
    }
    return params;
}

template <typename Real = float>
ParamSet<Real> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("checkpoint: cannot open: " + path);
    return load_checkpoint<Real>(is);
}

}  // namespace fdm
