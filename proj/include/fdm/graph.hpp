#pragma once

// Reverse-mode autodiff tape over dense tensors. Ops append nodes eagerly;
// backward() walks the tape in reverse creation order (a topological order by
// construction) and accumulates adjoints. All ops are deterministic: fixed
// iteration order, no reductions whose order depends on thread count.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "fdm/tensor.hpp"

namespace fdm {

template <typename Real>
class Graph {
public:
    using Id = std::int32_t;

    Graph() { nodes_.reserve(256); }

    // Leaf whose gradient is tracked (parameters, differentiable inputs).
    Id input(Tensor<Real> v) { return push(std::move(v), nullptr, true); }

    // Leaf treated as data: nothing upstream of it is differentiated.
    Id constant(Tensor<Real> v) { return push(std::move(v), nullptr, false); }

    const Tensor<Real>& value(Id id) const { return nodes_[id].value; }

    Real value_scalar(Id id) const {
        const auto& t = nodes_[id].value;
        if (t.numel() != 1) throw ValidationError("value_scalar: tensor is not scalar, shape " + shape_str(t.shape));
        return t.values[0];
    }

    std::size_t size() const { return nodes_.size(); }

    // ---- elementwise ----

    Id add(Id a, Id b) {
        check_same(a, b, "add");
        Tensor<Real> out = value(a);
        const auto& vb = value(b).values;
        for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += vb[i];
        return push(std::move(out), [a, b](Graph& g, const Tensor<Real>& up) {
            g.accumulate(a, up);
            g.accumulate(b, up);
        });
    }

    Id sub(Id a, Id b) {
        check_same(a, b, "sub");
        Tensor<Real> out = value(a);
        const auto& vb = value(b).values;
        for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= vb[i];
        return push(std::move(out), [a, b](Graph& g, const Tensor<Real>& up) {
            g.accumulate(a, up);
            Tensor<Real> neg = up;
            for (auto& v : neg.values) v = -v;
            g.accumulate(b, std::move(neg));
        });
    }

    Id mul(Id a, Id b) {
        check_same(a, b, "mul");
        Tensor<Real> out = value(a);
        const auto& vb = value(b).values;
        for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] *= vb[i];
        return push(std::move(out), [a, b](Graph& g, const Tensor<Real>& up) {
            const auto& va = g.value(a).values;
            const auto& vb2 = g.value(b).values;
            Tensor<Real> da = up, db = up;
            for (std::size_t i = 0; i < up.values.size(); ++i) {
                da.values[i] *= vb2[i];
                db.values[i] *= va[i];
            }
            g.accumulate(a, std::move(da));
            g.accumulate(b, std::move(db));
        });
    }

    Id scale(Id a, Real c) {
        Tensor<Real> out = value(a);
        for (auto& v : out.values) v *= c;
        return push(std::move(out), [a, c](Graph& g, const Tensor<Real>& up) {
            Tensor<Real> da = up;
            for (auto& v : da.values) v *= c;
            g.accumulate(a, std::move(da));
        });
    }

    Id silu(Id a) {
        Tensor<Real> out = value(a);
        for (auto& v : out.values) v = v * sigmoid(v);
        return push(std::move(out), [a](Graph& g, const Tensor<Real>& up) {
            const auto& x = g.value(a).values;
            Tensor<Real> da = up;
            for (std::size_t i = 0; i < x.size(); ++i) {
                Real s = sigmoid(x[i]);
                da.values[i] *= s * (Real(1) + x[i] * (Real(1) - s));
            }
            g.accumulate(a, std::move(da));
        });
    }

    // out = mask ? a : fill  (gradient is zero where filled)
    Id masked_fill(Id a, const std::vector<std::uint8_t>& keep, Real fill) {
        if (keep.size() != value(a).numel()) throw ValidationError("masked_fill: mask size mismatch");
        Tensor<Real> out = value(a);
        for (std::size_t i = 0; i < out.values.size(); ++i)
            if (!keep[i]) out.values[i] = fill;
        return push(std::move(out), [a, keep](Graph& g, const Tensor<Real>& up) {
            Tensor<Real> da = up;
            for (std::size_t i = 0; i < da.values.size(); ++i)
                if (!keep[i]) da.values[i] = Real(0);
            g.accumulate(a, std::move(da));
        });
    }

    // ---- linear algebra (rank 2) ----

    Id matmul(Id a, Id b) {
        require_rank(value(a), 2, "matmul lhs");
        require_rank(value(b), 2, "matmul rhs");
        const auto& va = value(a);
        const auto& vb = value(b);
        if (va.cols() != vb.rows())
            throw ValidationError("matmul: inner dims " + shape_str(va.shape) + " x " + shape_str(vb.shape));
        Tensor<Real> out = mat_mul_plain(va, vb);
        return push(std::move(out), [a, b](Graph& g, const Tensor<Real>& up) {
            // dA = up B^T, dB = A^T up
            g.accumulate(a, mat_mul_nt(up, g.value(b)));
            g.accumulate(b, mat_mul_tn(g.value(a), up));
        });
    }

    Id transpose(Id a) {
        require_rank(value(a), 2, "transpose");
        return push(transpose_plain(value(a)), [a](Graph& g, const Tensor<Real>& up) {
            g.accumulate(a, transpose_plain(up));
        });
    }

    // a: (m,n), v: (n) broadcast-added to every row
    Id add_rowvec(Id a, Id v) {
        require_rank(value(a), 2, "add_rowvec lhs");
        require_rank(value(v), 1, "add_rowvec rhs");
        const auto& va = value(a);
        const auto& vv = value(v);
        if (va.cols() != vv.shape[0]) throw ValidationError("add_rowvec: width mismatch");
        Tensor<Real> out = va;
        for (std::size_t r = 0; r < va.rows(); ++r)
            for (std::size_t c = 0; c < va.cols(); ++c) out.at(r, c) += vv.values[c];
        return push(std::move(out), [a, v](Graph& g, const Tensor<Real>& up) {
            g.accumulate(a, up);
            Tensor<Real> dv = Tensor<Real>::zeros({up.cols()});
            for (std::size_t r = 0; r < up.rows(); ++r)
                for (std::size_t c = 0; c < up.cols(); ++c) dv.values[c] += up.at(r, c);
            g.accumulate(v, std::move(dv));
        });
    }

    // a: (m,n), c: (m); out[r,:] = a[r,:] * c[r]
    Id mul_colvec(Id a, Id c) {
        require_rank(value(a), 2, "mul_colvec lhs");
        require_rank(value(c), 1, "mul_colvec rhs");
        const auto& va = value(a);
        const auto& vc = value(c);
        if (va.rows() != vc.shape[0]) throw ValidationError("mul_colvec: height mismatch");
        Tensor<Real> out = va;
        for (std::size_t r = 0; r < va.rows(); ++r)
            for (std::size_t col = 0; col < va.cols(); ++col) out.at(r, col) *= vc.values[r];
        return push(std::move(out), [a, c](Graph& g, const Tensor<Real>& up) {
            const auto& va2 = g.value(a);
            const auto& vc2 = g.value(c);
            Tensor<Real> da = up;
            Tensor<Real> dc = Tensor<Real>::zeros({up.rows()});
            for (std::size_t r = 0; r < up.rows(); ++r)
                for (std::size_t col = 0; col < up.cols(); ++col) {
                    da.at(r, col) *= vc2.values[r];
                    dc.values[r] += up.at(r, col) * va2.at(r, col);
                }
            g.accumulate(a, std::move(da));
            g.accumulate(c, std::move(dc));
        });
    }

    // ---- shape / indexing ----

    Id reshape(Id a, Shape s) {
        if (shape_numel(s) != value(a).numel())
            throw ValidationError("reshape: numel mismatch " + shape_str(value(a).shape) + " -> " + shape_str(s));
        Tensor<Real> out(s, value(a).values);
        Shape old = value(a).shape;
        return push(std::move(out), [a, old](Graph& g, const Tensor<Real>& up) {
            g.accumulate(a, Tensor<Real>(old, up.values));
        });
    }

    // Gather rows of a rank-2 tensor; duplicate indices accumulate additively
    // in the adjoint (scatter-add).
    Id gather_rows(Id a, std::vector<int> idx) {
        require_rank(value(a), 2, "gather_rows");
        const auto& va = value(a);
        std::size_t n = va.rows(), cols = va.cols();
        for (int i : idx)
            if (i < 0 || std::size_t(i) >= n) throw ValidationError("gather_rows: index out of range");
        Tensor<Real> out = Tensor<Real>::zeros({idx.size(), cols});
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = va.at(idx[r], c);
        return push(std::move(out), [a, idx = std::move(idx), n](Graph& g, const Tensor<Real>& up) {
            Tensor<Real> da = Tensor<Real>::zeros({n, up.cols()});
            for (std::size_t r = 0; r < idx.size(); ++r)
                for (std::size_t c = 0; c < up.cols(); ++c) da.at(idx[r], c) += up.at(r, c);
            g.accumulate(a, std::move(da));
        });
    }

    // Scatter rows of a into a zero (out_rows, cols) tensor; duplicates add.
    Id scatter_rows(Id a, std::vector<int> idx, std::size_t out_rows) {
        require_rank(value(a), 2, "scatter_rows");
        const auto& va = value(a);
        if (idx.size() != va.rows()) throw ValidationError("scatter_rows: index count mismatch");
        for (int i : idx)
            if (i < 0 || std::size_t(i) >= out_rows) throw ValidationError("scatter_rows: index out of range");
        Tensor<Real> out = Tensor<Real>::zeros({out_rows, va.cols()});
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t c = 0; c < va.cols(); ++c) out.at(idx[r], c) += va.at(r, c);
        return push(std::move(out), [a, idx = std::move(idx)](Graph& g, const Tensor<Real>& up) {
            Tensor<Real> da = Tensor<Real>::zeros({idx.size(), up.cols()});
            for (std::size_t r = 0; r < idx.size(); ++r)
                for (std::size_t c = 0; c < up.cols(); ++c) da.at(r, c) = up.at(idx[r], c);
            g.accumulate(a, std::move(da));
        });
    }

    Id slice_cols(Id a, std::size_t start, std::size_t len) {
        require_rank(value(a), 2, "slice_cols");
        const auto& va = value(a);
        if (start + len > va.cols()) throw ValidationError("slice_cols: range out of bounds");
        Tensor<Real> out = Tensor<Real>::zeros({va.rows(), len});
        for (std::size_t r = 0; r < va.rows(); ++r)
            for (std::size_t c = 0; c < len; ++c) out.at(r, c) = va.at(r, start + c);
        std::size_t total = va.cols();
        return push(std::move(out), [a, start, len, total](Graph& g, const Tensor<Real>& up) {
            Tensor<Real> da = Tensor<Real>::zeros({up.rows(), total});
            for (std::size_t r = 0; r < up.rows(); ++r)
                for (std::size_t c = 0; c < len; ++c) da.at(r, start + c) = up.at(r, c);
            g.accumulate(a, std::move(da));
        });
    }

    Id concat_rows(const std::vector<Id>& parts) {
        if (parts.empty()) throw ValidationError("concat_rows: empty");
        std::size_t cols = value(parts[0]).cols(), rows = 0;
        for (Id p : parts) {
            require_rank(value(p), 2, "concat_rows");
            if (value(p).cols() != cols) throw ValidationError("concat_rows: width mismatch");
            rows += value(p).rows();
        }
        Tensor<Real> out = Tensor<Real>::zeros({rows, cols});
        std::size_t r0 = 0;
        for (Id p : parts) {
            const auto& vp = value(p);
            std::copy(vp.values.begin(), vp.values.end(), out.values.begin() + r0 * cols);
            r0 += vp.rows();
        }
        return push(std::move(out), [parts](Graph& g, const Tensor<Real>& up) {
            std::size_t r = 0;
            for (Id p : parts) {
                std::size_t pr = g.value(p).rows(), cols2 = up.cols();
                Tensor<Real> dp = Tensor<Real>::zeros({pr, cols2});
                std::copy(up.values.begin() + r * cols2, up.values.begin() + (r + pr) * cols2,
                          dp.values.begin());
                g.accumulate(p, std::move(dp));
                r += pr;
            }
        });
    }

    Id concat_cols(const std::vector<Id>& parts) {
        if (parts.empty()) throw ValidationError("concat_cols: empty");
        std::size_t rows = value(parts[0]).rows(), cols = 0;
        for (Id p : parts) {
            require_rank(value(p), 2, "concat_cols");
            if (value(p).rows() != rows) throw ValidationError("concat_cols: height mismatch");
            cols += value(p).cols();
        }
        Tensor<Real> out = Tensor<Real>::zeros({rows, cols});
        std::size_t c0 = 0;
        for (Id p : parts) {
            const auto& vp = value(p);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < vp.cols(); ++c) out.at(r, c0 + c) = vp.at(r, c);
            c0 += vp.cols();
        }
        return push(std::move(out), [parts](Graph& g, const Tensor<Real>& up) {
            std::size_t c0b = 0;
            for (Id p : parts) {
                std::size_t pc = g.value(p).cols();
                Tensor<Real> dp = Tensor<Real>::zeros({up.rows(), pc});
                for (std::size_t r = 0; r < up.rows(); ++r)
                    for (std::size_t c = 0; c < pc; ++c) dp.at(r, c) = up.at(r, c0b + c);
                g.accumulate(p, std::move(dp));
                c0b += pc;
            }
        });
    }

    // ---- normalization / softmax / reductions ----

    // Normalize each row over the channel axis, then apply learned gain/bias.
    Id layer_norm(Id a, Id gain, Id bias, Real eps = Real(1e-5)) {
        require_rank(value(a), 2, "layer_norm");
        require_rank(value(gain), 1, "layer_norm gain");
        require_rank(value(bias), 1, "layer_norm bias");
        const auto& va = value(a);
        std::size_t n = va.cols();
        if (value(gain).shape[0] != n || value(bias).shape[0] != n)
            throw ValidationError("layer_norm: gain/bias width mismatch");
        Tensor<Real> out = Tensor<Real>::zeros(va.shape);
        const auto& gv = value(gain).values;
        const auto& bv = value(bias).values;
        for (std::size_t r = 0; r < va.rows(); ++r) {
            Real mean = 0, var = 0;
            for (std::size_t c = 0; c < n; ++c) mean += va.at(r, c);
            mean /= Real(n);
            for (std::size_t c = 0; c < n; ++c) {
                Real d = va.at(r, c) - mean;
                var += d * d;
            }
            var /= Real(n);
            Real inv = Real(1) / std::sqrt(var + eps);
            for (std::size_t c = 0; c < n; ++c)
                out.at(r, c) = (va.at(r, c) - mean) * inv * gv[c] + bv[c];
        }
        return push(std::move(out), [a, gain, bias, eps](Graph& g, const Tensor<Real>& up) {
            const auto& x = g.value(a);
            const auto& gv2 = g.value(gain).values;
            std::size_t rows = x.rows(), n2 = x.cols();
            Tensor<Real> da = Tensor<Real>::zeros(x.shape);
            Tensor<Real> dg = Tensor<Real>::zeros({n2});
            Tensor<Real> db = Tensor<Real>::zeros({n2});
            std::vector<Real> xhat(n2);
            for (std::size_t r = 0; r < rows; ++r) {
                Real mean = 0, var = 0;
                for (std::size_t c = 0; c < n2; ++c) mean += x.at(r, c);
                mean /= Real(n2);
                for (std::size_t c = 0; c < n2; ++c) {
                    Real d = x.at(r, c) - mean;
                    var += d * d;
                }
                var /= Real(n2);
                Real inv = Real(1) / std::sqrt(var + eps);
                Real m1 = 0, m2 = 0;  // means of gy and gy*xhat over the row
                for (std::size_t c = 0; c < n2; ++c) {
                    xhat[c] = (x.at(r, c) - mean) * inv;
                    Real gy = up.at(r, c) * gv2[c];
                    m1 += gy;
                    m2 += gy * xhat[c];
                    dg.values[c] += up.at(r, c) * xhat[c];
                    db.values[c] += up.at(r, c);
                }
                m1 /= Real(n2);
                m2 /= Real(n2);
                for (std::size_t c = 0; c < n2; ++c) {
                    Real gy = up.at(r, c) * gv2[c];
                    da.at(r, c) = inv * (gy - m1 - xhat[c] * m2);
                }
            }
            g.accumulate(a, std::move(da));
            g.accumulate(gain, std::move(dg));
            g.accumulate(bias, std::move(db));
        });
    }

    // Row softmax restricted to allowed entries; masked entries get exactly
    // zero weight (and zero gradient). Every row must have an allowed entry.
    Id softmax_rows(Id a, const MaskMatrix& mask) {
        require_rank(value(a), 2, "softmax_rows");
        const auto& va = value(a);
        if (mask.n != va.rows() || va.rows() != va.cols())
            throw ValidationError("softmax_rows: mask/logits size mismatch");
        Tensor<Real> out = Tensor<Real>::zeros(va.shape);
        for (std::size_t r = 0; r < va.rows(); ++r) {
            Real mx = 0;
            bool any = false;
            for (std::size_t c = 0; c < va.cols(); ++c)
                if (mask.at(r, c)) {
                    mx = any ? std::max(mx, va.at(r, c)) : va.at(r, c);
                    any = true;
                }
            if (!any) throw ValidationError("softmax_rows: fully masked row " + std::to_string(r));
            Real denom = 0;
            for (std::size_t c = 0; c < va.cols(); ++c)
                if (mask.at(r, c)) denom += std::exp(va.at(r, c) - mx);
            for (std::size_t c = 0; c < va.cols(); ++c)
                if (mask.at(r, c)) out.at(r, c) = std::exp(va.at(r, c) - mx) / denom;
        }
        Id self = push(std::move(out), nullptr);
        nodes_[self].needs_grad = true;
        nodes_[self].backward = [a, self, mask](Graph& g, const Tensor<Real>& up) {
            const auto& s = g.value(self);
            Tensor<Real> da = Tensor<Real>::zeros(s.shape);
            for (std::size_t r = 0; r < s.rows(); ++r) {
                Real dot = 0;
                for (std::size_t c = 0; c < s.cols(); ++c)
                    if (mask.at(r, c)) dot += up.at(r, c) * s.at(r, c);
                for (std::size_t c = 0; c < s.cols(); ++c)
                    if (mask.at(r, c)) da.at(r, c) = s.at(r, c) * (up.at(r, c) - dot);
            }
            g.accumulate(a, std::move(da));
        };
        return self;
    }

    // Unmasked softmax over a chosen axis of a rank-2 tensor.
    Id softmax(Id a, int axis) {
        require_rank(value(a), 2, "softmax");
        if (axis == 0) return transpose(softmax(transpose(a), 1));
        const auto& va = value(a);
        std::size_t n = std::max(va.rows(), va.cols());
        (void)n;
        MaskMatrix all = MaskMatrix::all_true(va.rows());
        if (va.rows() == va.cols()) return softmax_rows(a, all);
        // non-square: pad-free direct computation
        Tensor<Real> out = Tensor<Real>::zeros(va.shape);
        for (std::size_t r = 0; r < va.rows(); ++r) {
            Real mx = va.at(r, 0);
            for (std::size_t c = 1; c < va.cols(); ++c) mx = std::max(mx, va.at(r, c));
            Real denom = 0;
            for (std::size_t c = 0; c < va.cols(); ++c) denom += std::exp(va.at(r, c) - mx);
            for (std::size_t c = 0; c < va.cols(); ++c) out.at(r, c) = std::exp(va.at(r, c) - mx) / denom;
        }
        Id self = push(std::move(out), nullptr);
        nodes_[self].needs_grad = true;
        nodes_[self].backward = [a, self](Graph& g, const Tensor<Real>& up) {
            const auto& s = g.value(self);
            Tensor<Real> da = Tensor<Real>::zeros(s.shape);
            for (std::size_t r = 0; r < s.rows(); ++r) {
                Real dot = 0;
                for (std::size_t c = 0; c < s.cols(); ++c) dot += up.at(r, c) * s.at(r, c);
                for (std::size_t c = 0; c < s.cols(); ++c)
                    da.at(r, c) = s.at(r, c) * (up.at(r, c) - dot);
            }
            g.accumulate(a, std::move(da));
        };
        return self;
    }

    // (R, C) -> (R): sum over the last axis
    Id sum_cols(Id a) {
        require_rank(value(a), 2, "sum_cols");
        const auto& va = value(a);
        Tensor<Real> out = Tensor<Real>::zeros({va.rows()});
        for (std::size_t r = 0; r < va.rows(); ++r)
            for (std::size_t c = 0; c < va.cols(); ++c) out.values[r] += va.at(r, c);
        std::size_t cols = va.cols();
        return push(std::move(out), [a, cols](Graph& g, const Tensor<Real>& up) {
            Tensor<Real> da = Tensor<Real>::zeros({up.shape[0], cols});
            for (std::size_t r = 0; r < up.shape[0]; ++r)
                for (std::size_t c = 0; c < cols; ++c) da.at(r, c) = up.values[r];
            g.accumulate(a, std::move(da));
        });
    }

    // (R, C) -> (R/group, C): sums consecutive groups of `group` rows
    Id sum_row_groups(Id a, std::size_t group) {
        require_rank(value(a), 2, "sum_row_groups");
        const auto& va = value(a);
        if (group == 0 || va.rows() % group != 0)
            throw ValidationError("sum_row_groups: rows not divisible by group");
        std::size_t out_rows = va.rows() / group;
        Tensor<Real> out = Tensor<Real>::zeros({out_rows, va.cols()});
        for (std::size_t r = 0; r < va.rows(); ++r)
            for (std::size_t c = 0; c < va.cols(); ++c) out.at(r / group, c) += va.at(r, c);
        return push(std::move(out), [a, group](Graph& g, const Tensor<Real>& up) {
            std::size_t rows = up.rows() * group;
            Tensor<Real> da = Tensor<Real>::zeros({rows, up.cols()});
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < up.cols(); ++c) da.at(r, c) = up.at(r / group, c);
            g.accumulate(a, std::move(da));
        });
    }

    Id sum_all(Id a) {
        Real s = 0;
        for (Real v : value(a).values) s += v;
        Shape orig = value(a).shape;
        return push(Tensor<Real>::scalar(s), [a, orig](Graph& g, const Tensor<Real>& up) {
            g.accumulate(a, Tensor<Real>::full(orig, up.values[0]));
        });
    }

    Id sum_squares(Id a) {
        Real s = 0;
        for (Real v : value(a).values) s += v * v;
        return push(Tensor<Real>::scalar(s), [a](Graph& g, const Tensor<Real>& up) {
            const auto& x = g.value(a);
            Tensor<Real> da = x;
            for (auto& v : da.values) v *= Real(2) * up.values[0];
            g.accumulate(a, std::move(da));
        });
    }

    // ---- backward ----

    void backward(Id loss) {
        const auto& lv = value(loss);
        if (lv.numel() != 1)
            throw ValidationError("backward: loss must be scalar, got shape " + shape_str(lv.shape));
        grads_.assign(nodes_.size(), Tensor<Real>{});
        accumulate(loss, Tensor<Real>::full(lv.shape, Real(1)));
        for (Id id = loss; id >= 0; --id) {
            if (grads_[id].values.empty()) continue;
            if (!nodes_[id].needs_grad) continue;
            if (nodes_[id].backward) nodes_[id].backward(*this, grads_[id]);
        }
    }

    // Gradient of the last backward() w.r.t. a leaf; zeros if never reached.
    Tensor<Real> grad(Id id) const {
        if (std::size_t(id) < grads_.size() && !grads_[id].values.empty()) return grads_[id];
        return Tensor<Real>::zeros(nodes_[id].value.shape);
    }

    void accumulate(Id id, Tensor<Real> g) {
        if (!nodes_[id].needs_grad) return;
        if (grads_[id].values.empty()) {
            grads_[id] = std::move(g);
        } else {
            auto& acc = grads_[id].values;
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g.values[i];
        }
    }

private:
    struct Node {
        Tensor<Real> value;
        std::function<void(Graph&, const Tensor<Real>&)> backward;
        bool needs_grad = false;
    };

    std::vector<Node> nodes_;
    std::vector<Tensor<Real>> grads_;

    static Real sigmoid(Real x) { return Real(1) / (Real(1) + std::exp(-x)); }

    // Op nodes always propagate adjoints; constants absorb them (accumulate
    // is a no-op for needs_grad == false), so gradient flow stops there.
    Id push(Tensor<Real> v, std::function<void(Graph&, const Tensor<Real>&)> bw, bool leaf_grad = false) {
        Node n;
        n.value = std::move(v);
        n.needs_grad = bw != nullptr || leaf_grad;
        n.backward = std::move(bw);
        nodes_.push_back(std::move(n));
        return Id(nodes_.size() - 1);
    }

    void check_same(Id a, Id b, const char* what) const {
        if (!value(a).same_shape(value(b)))
            throw ValidationError(std::string(what) + ": shape mismatch " + shape_str(value(a).shape) +
                                  " vs " + shape_str(value(b).shape));
    }

    static Tensor<Real> mat_mul_plain(const Tensor<Real>& a, const Tensor<Real>& b) {
        std::size_t m = a.rows(), k = a.cols(), n = b.cols();
        Tensor<Real> out = Tensor<Real>::zeros({m, n});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                Real av = a.at(i, p);
                const Real* brow = &b.values[p * n];
                Real* orow = &out.values[i * n];
                for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
        return out;
    }

    // a (m,k), b (n,k) -> a b^T (m,n)
    static Tensor<Real> mat_mul_nt(const Tensor<Real>& a, const Tensor<Real>& b) {
        std::size_t m = a.rows(), k = a.cols(), n = b.rows();
        Tensor<Real> out = Tensor<Real>::zeros({m, n});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                Real s = 0;
                const Real* ar = &a.values[i * k];
                const Real* br = &b.values[j * k];
                for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
                out.at(i, j) = s;
            }
        return out;
    }

    // a (k,m), b (k,n) -> a^T b (m,n)
    static Tensor<Real> mat_mul_tn(const Tensor<Real>& a, const Tensor<Real>& b) {
        std::size_t k = a.rows(), m = a.cols(), n = b.cols();
        Tensor<Real> out = Tensor<Real>::zeros({m, n});
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t i = 0; i < m; ++i) {
                Real av = a.at(p, i);
                const Real* brow = &b.values[p * n];
                Real* orow = &out.values[i * n];
                for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
        return out;
    }

    static Tensor<Real> transpose_plain(const Tensor<Real>& a) {
        Tensor<Real> out = Tensor<Real>::zeros({a.cols(), a.rows()});
        for (std::size_t r = 0; r < a.rows(); ++r)
            for (std::size_t c = 0; c < a.cols(); ++c) out.at(c, r) = a.at(r, c);
        return out;
    }
};

}  // namespace fdm
