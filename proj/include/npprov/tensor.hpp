#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "npprov/errors.hpp"

namespace npprov {

using Shape = std::vector<int64_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

// Dense row-major array of doubles. Scalars are shape {1}; rank 0 is not used.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), data(static_cast<size_t>(shape_numel(shape)), 0.0) {
        validate();
    }
    Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        validate();
        if (shape_numel(shape) != static_cast<int64_t>(data.size()))
            throw ContractViolation("Tensor: shape " + shape_str(shape) + " does not match data length " +
                                    std::to_string(data.size()));
    }

    static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
    static Tensor full(Shape s, double v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }
    static Tensor ones(Shape s) { return full(std::move(s), 1.0); }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor from(std::vector<double> v) {
        auto n = static_cast<int64_t>(v.size());
        return Tensor({n}, std::move(v));
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    double& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    // multi-index access, mostly for tests and small fixtures
    double& at(std::initializer_list<int64_t> idx) { return data[static_cast<size_t>(offset_of(idx))]; }
    double at(std::initializer_list<int64_t> idx) const { return data[static_cast<size_t>(offset_of(idx))]; }

private:
    void validate() const {
        for (int64_t d : shape)
            if (d <= 0) throw ContractViolation("Tensor: non-positive dimension in shape " + shape_str(shape));
    }
    int64_t offset_of(std::initializer_list<int64_t> idx) const {
        if (static_cast<int>(idx.size()) != rank())
            throw ContractViolation("Tensor::at: index rank mismatch for shape " + shape_str(shape));
        int64_t off = 0;
        int i = 0;
        for (int64_t v : idx) {
            off = off * shape[i] + v;
            ++i;
        }
        return off;
    }
};

inline std::vector<int64_t> row_major_strides(const Shape& s) {
    std::vector<int64_t> st(s.size());
    int64_t acc = 1;
    for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
        st[static_cast<size_t>(i)] = acc;
        acc *= s[static_cast<size_t>(i)];
    }
    return st;
}

inline void check_finite(const Tensor& t, const char* what) {
    for (double v : t.data)
        if (!std::isfinite(v)) throw NumericFault(std::string(what) + ": non-finite value in output");
}

// Broadcast plan for mapping two operand shapes onto a common result shape.
// Operand strides are right-aligned; broadcast axes get stride 0.
struct BroadcastPlan {
    Shape out_shape;
    std::vector<int64_t> a_strides;
    std::vector<int64_t> b_strides;
};

inline BroadcastPlan broadcast_plan(const Shape& a, const Shape& b) {
    const int ra = static_cast<int>(a.size()), rb = static_cast<int>(b.size());
    const int r = std::max(ra, rb);
    BroadcastPlan p;
    p.out_shape.resize(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
        int64_t da = i < r - ra ? 1 : a[static_cast<size_t>(i - (r - ra))];
        int64_t db = i < r - rb ? 1 : b[static_cast<size_t>(i - (r - rb))];
        if (da != db && da != 1 && db != 1)
            throw ContractViolation("broadcast: incompatible shapes " + shape_str(a) + " and " + shape_str(b));
        p.out_shape[static_cast<size_t>(i)] = std::max(da, db);
    }
    auto sa = row_major_strides(a), sb = row_major_strides(b);
    p.a_strides.assign(static_cast<size_t>(r), 0);
    p.b_strides.assign(static_cast<size_t>(r), 0);
    for (int i = 0; i < r; ++i) {
        if (i >= r - ra && a[static_cast<size_t>(i - (r - ra))] != 1)
            p.a_strides[static_cast<size_t>(i)] = sa[static_cast<size_t>(i - (r - ra))];
        if (i >= r - rb && b[static_cast<size_t>(i - (r - rb))] != 1)
            p.b_strides[static_cast<size_t>(i)] = sb[static_cast<size_t>(i - (r - rb))];
    }
    return p;
}

// Visit every output position with the matching operand offsets.
template <typename Fn>
inline void for_each_broadcast(const BroadcastPlan& p, Fn&& fn) {
    const int r = static_cast<int>(p.out_shape.size());
    const int64_t n = shape_numel(p.out_shape);
    if (r == 0) return;
    std::vector<int64_t> idx(static_cast<size_t>(r), 0);
    int64_t ao = 0, bo = 0;
    for (int64_t o = 0; o < n; ++o) {
        fn(o, ao, bo);
        for (int d = r - 1; d >= 0; --d) {
            auto du = static_cast<size_t>(d);
            ++idx[du];
            ao += p.a_strides[du];
            bo += p.b_strides[du];
            if (idx[du] < p.out_shape[du]) break;
            ao -= p.a_strides[du] * p.out_shape[du];
            bo -= p.b_strides[du] * p.out_shape[du];
            idx[du] = 0;
        }
    }
}

}  // namespace npprov
