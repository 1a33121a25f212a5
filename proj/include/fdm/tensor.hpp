#pragma once

// Dense row-major tensors over float (training) or double (verification mode).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace fdm {

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

template <typename Real>
struct Tensor {
    Shape shape;
    std::vector<Real> values;

    Tensor() = default;
    Tensor(Shape s, std::vector<Real> v) : shape(std::move(s)), values(std::move(v)) {
        if (shape_numel(shape) != values.size())
            throw ValidationError("tensor: value count " + std::to_string(values.size()) +
                                  " does not match shape " + shape_str(shape));
    }

    static Tensor zeros(Shape s) {
        std::size_t n = shape_numel(s);
        return Tensor(std::move(s), std::vector<Real>(n, Real(0)));
    }
    static Tensor full(Shape s, Real fill) {
        std::size_t n = shape_numel(s);
        return Tensor(std::move(s), std::vector<Real>(n, fill));
    }
    static Tensor scalar(Real v) { return Tensor(Shape{}, {v}); }

    std::size_t numel() const { return values.size(); }
    std::size_t rank() const { return shape.size(); }

    // rank-2 accessors
    std::size_t rows() const { return shape.at(0); }
    std::size_t cols() const { return shape.at(1); }
    Real& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    Real at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    bool all_finite() const {
        for (Real v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    template <typename Other>
    Tensor<Other> cast() const {
        std::vector<Other> out(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<Other>(values[i]);
        return Tensor<Other>(shape, std::move(out));
    }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

template <typename Real>
void require_shape(const Tensor<Real>& t, const Shape& want, const char* what) {
    if (t.shape != want)
        throw ValidationError(std::string(what) + ": expected shape " + shape_str(want) +
                              ", got " + shape_str(t.shape));
}

template <typename Real>
void require_rank(const Tensor<Real>& t, std::size_t r, const char* what) {
    if (t.rank() != r)
        throw ValidationError(std::string(what) + ": expected rank " + std::to_string(r) +
                              ", got shape " + shape_str(t.shape));
}

// Row-major boolean mask for a square attention grid. true = attention allowed.
struct MaskMatrix {
    std::size_t n = 0;
    std::vector<std::uint8_t> allowed;

    MaskMatrix() = default;
    explicit MaskMatrix(std::size_t size, bool value = true)
        : n(size), allowed(size * size, value ? 1 : 0) {}

    bool at(std::size_t i, std::size_t j) const { return allowed[i * n + j] != 0; }
    void set(std::size_t i, std::size_t j, bool v) { allowed[i * n + j] = v ? 1 : 0; }

    static MaskMatrix all_true(std::size_t size) { return MaskMatrix(size, true); }

    // Block mask from group labels: (i,j) allowed iff same group.
    static MaskMatrix from_groups(const std::vector<int>& group) {
        MaskMatrix m(group.size(), false);
        for (std::size_t i = 0; i < group.size(); ++i)
            for (std::size_t j = 0; j < group.size(); ++j)
                if (group[i] == group[j]) m.set(i, j, true);
        return m;
    }
};

}  // namespace fdm
