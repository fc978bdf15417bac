#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "npprov/conv.hpp"
#include "npprov/errors.hpp"
#include "npprov/tensor.hpp"

namespace npprov {

class Graph;

// Cheap handle to a node owned by a Graph.
struct Value {
    Graph* g = nullptr;
    int id = -1;
    bool valid() const { return g != nullptr && id >= 0; }
    const Tensor& val() const;
};

namespace mathdetail {
inline double sigmoid_stable(double x) {
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}
inline double softplus_stable(double x) {
    // log(1 + e^x) without overflow on either side
    if (x > 35.0) return x;
    if (x < -35.0) return std::exp(x);
    return std::log1p(std::exp(x));
}
}  // namespace mathdetail

// Reverse-mode tape. Nodes are appended in evaluation order (eager forward),
// so reverse creation order is a valid reverse-topological order for the
// backward sweep. One Graph is confined to a single thread.
class Graph {
public:
    Value constant(Tensor t) { return push(std::move(t), {}, false, nullptr); }

    Value param(Tensor t) { return push(std::move(t), {}, true, nullptr); }

    const Tensor& value(Value v) const { return nodes_[check(v)].value; }

    // zeros when the node never received gradient (not on any path to the loss)
    Tensor grad_of(Value v) const {
        const Node& n = nodes_[check(v)];
        if (n.grad.numel() == n.value.numel()) return n.grad;
        return Tensor::zeros(n.value.shape);
    }

    size_t size() const { return nodes_.size(); }

    // ---- elementwise, broadcasting over size-1 axes ----

    Value add(Value a, Value b) {
        auto p = broadcast_plan(shape(a), shape(b));
        Tensor out(p.out_shape);
        const Tensor &ta = val(a), &tb = val(b);
        for_each_broadcast(p, [&](int64_t o, int64_t ao, int64_t bo) { out[o] = ta[ao] + tb[bo]; });
        return push(std::move(out), {a.id, b.id}, rg(a) || rg(b), [p, a, b](Graph& g, int self) {
            const Tensor& go = g.nodes_[self].grad;
            Tensor *ga = g.want(a), *gb = g.want(b);
            for_each_broadcast(p, [&](int64_t o, int64_t ao, int64_t bo) {
                if (ga) (*ga)[ao] += go[o];
                if (gb) (*gb)[bo] += go[o];
            });
        }, "add");
    }

    Value sub(Value a, Value b) {
        auto p = broadcast_plan(shape(a), shape(b));
        Tensor out(p.out_shape);
        const Tensor &ta = val(a), &tb = val(b);
        for_each_broadcast(p, [&](int64_t o, int64_t ao, int64_t bo) { out[o] = ta[ao] - tb[bo]; });
        return push(std::move(out), {a.id, b.id}, rg(a) || rg(b), [p, a, b](Graph& g, int self) {
            const Tensor& go = g.nodes_[self].grad;
            Tensor *ga = g.want(a), *gb = g.want(b);
            for_each_broadcast(p, [&](int64_t o, int64_t ao, int64_t bo) {
                if (ga) (*ga)[ao] += go[o];
                if (gb) (*gb)[bo] -= go[o];
            });
        }, "sub");
    }

    Value mul(Value a, Value b) {
        auto p = broadcast_plan(shape(a), shape(b));
        Tensor out(p.out_shape);
        const Tensor &ta = val(a), &tb = val(b);
        for_each_broadcast(p, [&](int64_t o, int64_t ao, int64_t bo) { out[o] = ta[ao] * tb[bo]; });
        return push(std::move(out), {a.id, b.id}, rg(a) || rg(b), [p, a, b](Graph& g, int self) {
            const Tensor& go = g.nodes_[self].grad;
            const Tensor &ta2 = g.val(a), &tb2 = g.val(b);
            Tensor *ga = g.want(a), *gb = g.want(b);
            for_each_broadcast(p, [&](int64_t o, int64_t ao, int64_t bo) {
                if (ga) (*ga)[ao] += go[o] * tb2[bo];
                if (gb) (*gb)[bo] += go[o] * ta2[ao];
            });
        }, "mul");
    }

    Value div(Value a, Value b) {
        auto p = broadcast_plan(shape(a), shape(b));
        Tensor out(p.out_shape);
        const Tensor &ta = val(a), &tb = val(b);
        for_each_broadcast(p, [&](int64_t o, int64_t ao, int64_t bo) { out[o] = ta[ao] / tb[bo]; });
        return push(std::move(out), {a.id, b.id}, rg(a) || rg(b), [p, a, b](Graph& g, int self) {
            const Tensor& go = g.nodes_[self].grad;
            const Tensor &ta2 = g.val(a), &tb2 = g.val(b);
            Tensor *ga = g.want(a), *gb = g.want(b);
            for_each_broadcast(p, [&](int64_t o, int64_t ao, int64_t bo) {
                const double inv = 1.0 / tb2[bo];
                if (ga) (*ga)[ao] += go[o] * inv;
                if (gb) (*gb)[bo] -= go[o] * ta2[ao] * inv * inv;
            });
        }, "div");
    }

    Value neg(Value a) {
        return unary(a, "neg", [](double x) { return -x; },
                     [](double, double, double go) { return -go; });
    }
    Value exp(Value a) {
        return unary(a, "exp", [](double x) { return std::exp(x); },
                     [](double, double y, double go) { return go * y; });
    }
    Value log(Value a) {
        return unary(a, "log", [](double x) { return std::log(x); },
                     [](double x, double, double go) { return go / x; });
    }
    Value relu(Value a) {
        return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                     [](double x, double, double go) { return x > 0.0 ? go : 0.0; });
    }
    Value softplus(Value a) {
        return unary(a, "softplus", [](double x) { return mathdetail::softplus_stable(x); },
                     [](double x, double, double go) { return go * mathdetail::sigmoid_stable(x); });
    }
    Value sigmoid(Value a) {
        return unary(a, "sigmoid", [](double x) { return mathdetail::sigmoid_stable(x); },
                     [](double, double y, double go) { return go * y * (1.0 - y); });
    }

    // ---- shape ops ----

    Value reshape(Value a, Shape s) {
        if (shape_numel(s) != val(a).numel())
            throw ContractViolation("reshape: cannot view " + shape_str(shape(a)) + " as " + shape_str(s));
        Tensor out(s, val(a).data);
        return push(std::move(out), {a.id}, rg(a), [a](Graph& g, int self) {
            if (Tensor* ga = g.want(a)) {
                const Tensor& go = g.nodes_[self].grad;
                for (int64_t i = 0; i < go.numel(); ++i) (*ga)[i] += go[i];
            }
        }, "reshape");
    }

    // materialize a broadcast of `a` to `s` (gradient sums over expanded axes)
    Value expand(Value a, Shape s) {
        auto p = broadcast_plan(shape(a), s);
        if (p.out_shape != s)
            throw ContractViolation("expand: " + shape_str(shape(a)) + " does not broadcast to " + shape_str(s));
        Tensor out(s);
        const Tensor& ta = val(a);
        for_each_broadcast(p, [&](int64_t o, int64_t ao, int64_t) { out[o] = ta[ao]; });
        return push(std::move(out), {a.id}, rg(a), [p, a](Graph& g, int self) {
            if (Tensor* ga = g.want(a)) {
                const Tensor& go = g.nodes_[self].grad;
                for_each_broadcast(p, [&](int64_t o, int64_t ao, int64_t) { (*ga)[ao] += go[o]; });
            }
        }, "expand");
    }

    Value concat(const std::vector<Value>& vs, int axis) {
        if (vs.empty()) throw ContractViolation("concat: no inputs");
        const Shape& s0 = shape(vs[0]);
        const int r = static_cast<int>(s0.size());
        if (axis < 0 || axis >= r) throw ContractViolation("concat: bad axis");
        Shape os = s0;
        os[static_cast<size_t>(axis)] = 0;
        for (const Value& v : vs) {
            const Shape& s = shape(v);
            if (static_cast<int>(s.size()) != r)
                throw ContractViolation("concat: rank mismatch " + shape_str(s0) + " vs " + shape_str(s));
            for (int d = 0; d < r; ++d)
                if (d != axis && s[static_cast<size_t>(d)] != s0[static_cast<size_t>(d)])
                    throw ContractViolation("concat: shape mismatch " + shape_str(s0) + " vs " + shape_str(s));
            os[static_cast<size_t>(axis)] += s[static_cast<size_t>(axis)];
        }
        int64_t outer = 1, inner = 1;
        for (int d = 0; d < axis; ++d) outer *= os[static_cast<size_t>(d)];
        for (int d = axis + 1; d < r; ++d) inner *= os[static_cast<size_t>(d)];
        Tensor out(os);
        const int64_t ostep = os[static_cast<size_t>(axis)] * inner;
        int64_t off = 0;
        for (const Value& v : vs) {
            const Tensor& tv = val(v);
            const int64_t block = shape(v)[static_cast<size_t>(axis)] * inner;
            for (int64_t ou = 0; ou < outer; ++ou)
                std::copy_n(tv.data.data() + ou * block, block, out.data.data() + ou * ostep + off);
            off += block;
        }
        std::vector<int> ids;
        bool needs = false;
        for (const Value& v : vs) {
            ids.push_back(v.id);
            needs = needs || rg(v);
        }
        std::vector<Value> vcopy = vs;
        return push(std::move(out), std::move(ids), needs, [vcopy, axis, outer, inner, ostep](Graph& g, int self) {
            const Tensor& go = g.nodes_[self].grad;
            int64_t off = 0;
            for (const Value& v : vcopy) {
                const int64_t block = g.shape(v)[static_cast<size_t>(axis)] * inner;
                if (Tensor* ga = g.want(v)) {
                    for (int64_t ou = 0; ou < outer; ++ou) {
                        const double* src = go.data.data() + ou * ostep + off;
                        double* dst = ga->data.data() + ou * block;
                        for (int64_t i = 0; i < block; ++i) dst[i] += src[i];
                    }
                }
                off += block;
            }
        }, "concat");
    }

    Value slice(Value a, int axis, int64_t start, int64_t len) {
        const Shape& s = shape(a);
        const int r = static_cast<int>(s.size());
        if (axis < 0 || axis >= r) throw ContractViolation("slice: bad axis");
        if (start < 0 || len <= 0 || start + len > s[static_cast<size_t>(axis)])
            throw ContractViolation("slice: range out of bounds for " + shape_str(s));
        Shape os = s;
        os[static_cast<size_t>(axis)] = len;
        int64_t outer = 1, inner = 1;
        for (int d = 0; d < axis; ++d) outer *= s[static_cast<size_t>(d)];
        for (int d = axis + 1; d < r; ++d) inner *= s[static_cast<size_t>(d)];
        const int64_t istep = s[static_cast<size_t>(axis)] * inner;
        Tensor out(os);
        const Tensor& ta = val(a);
        for (int64_t ou = 0; ou < outer; ++ou)
            std::copy_n(ta.data.data() + ou * istep + start * inner, len * inner, out.data.data() + ou * len * inner);
        return push(std::move(out), {a.id}, rg(a), [a, outer, inner, istep, start, len](Graph& g, int self) {
            if (Tensor* ga = g.want(a)) {
                const Tensor& go = g.nodes_[self].grad;
                for (int64_t ou = 0; ou < outer; ++ou) {
                    const double* src = go.data.data() + ou * len * inner;
                    double* dst = ga->data.data() + ou * istep + start * inner;
                    for (int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
                }
            }
        }, "slice");
    }

    Value pad_axis(Value a, int axis, int64_t before, int64_t after) {
        const Shape& s = shape(a);
        const int r = static_cast<int>(s.size());
        if (axis < 0 || axis >= r || before < 0 || after < 0) throw ContractViolation("pad_axis: bad arguments");
        Shape os = s;
        os[static_cast<size_t>(axis)] += before + after;
        int64_t outer = 1, inner = 1;
        for (int d = 0; d < axis; ++d) outer *= s[static_cast<size_t>(d)];
        for (int d = axis + 1; d < r; ++d) inner *= s[static_cast<size_t>(d)];
        const int64_t iblock = s[static_cast<size_t>(axis)] * inner;
        const int64_t oblock = os[static_cast<size_t>(axis)] * inner;
        Tensor out(os);
        const Tensor& ta = val(a);
        for (int64_t ou = 0; ou < outer; ++ou)
            std::copy_n(ta.data.data() + ou * iblock, iblock, out.data.data() + ou * oblock + before * inner);
        return push(std::move(out), {a.id}, rg(a), [a, outer, inner, iblock, oblock, before](Graph& g, int self) {
            if (Tensor* ga = g.want(a)) {
                const Tensor& go = g.nodes_[self].grad;
                for (int64_t ou = 0; ou < outer; ++ou) {
                    const double* src = go.data.data() + ou * oblock + before * inner;
                    double* dst = ga->data.data() + ou * iblock;
                    for (int64_t i = 0; i < iblock; ++i) dst[i] += src[i];
                }
            }
        }, "pad_axis");
    }

    // ---- reductions ----

    Value sum(Value a, int axis) { return reduce(a, axis, false); }
    Value mean(Value a, int axis) { return reduce(a, axis, true); }

    Value sum_all(Value a) {
        const Tensor& ta = val(a);
        double acc = 0.0;
        for (double v : ta.data) acc += v;
        return push(Tensor::scalar(acc), {a.id}, rg(a), [a](Graph& g, int self) {
            if (Tensor* ga = g.want(a)) {
                const double go = g.nodes_[self].grad[0];
                for (auto& v : ga->data) v += go;
            }
        }, "sum_all");
    }

    Value mean_all(Value a) {
        const Tensor& ta = val(a);
        double acc = 0.0;
        for (double v : ta.data) acc += v;
        const double n = static_cast<double>(ta.numel());
        return push(Tensor::scalar(acc / n), {a.id}, rg(a), [a, n](Graph& g, int self) {
            if (Tensor* ga = g.want(a)) {
                const double go = g.nodes_[self].grad[0] / n;
                for (auto& v : ga->data) v += go;
            }
        }, "mean_all");
    }

    // ---- linear maps ----

    Value matmul(Value a, Value b) {
        const Shape &sa = shape(a), &sb = shape(b);
        if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
            throw ContractViolation("matmul: incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
        const int64_t P = sa[0], K = sa[1], Q = sb[1];
        Tensor out({P, Q});
        const Tensor &ta = val(a), &tb = val(b);
        for (int64_t i = 0; i < P; ++i)
            for (int64_t k = 0; k < K; ++k) {
                const double av = ta[i * K + k];
                const double* brow = tb.data.data() + k * Q;
                double* orow = out.data.data() + i * Q;
                for (int64_t j = 0; j < Q; ++j) orow[j] += av * brow[j];
            }
        return push(std::move(out), {a.id, b.id}, rg(a) || rg(b), [a, b, P, K, Q](Graph& g, int self) {
            const Tensor& go = g.nodes_[self].grad;
            const Tensor &ta2 = g.val(a), &tb2 = g.val(b);
            if (Tensor* ga = g.want(a)) {
                for (int64_t i = 0; i < P; ++i)
                    for (int64_t k = 0; k < K; ++k) {
                        const double* grow = go.data.data() + i * Q;
                        const double* brow = tb2.data.data() + k * Q;
                        double acc = 0.0;
                        for (int64_t j = 0; j < Q; ++j) acc += grow[j] * brow[j];
                        (*ga)[i * K + k] += acc;
                    }
            }
            if (Tensor* gb = g.want(b)) {
                for (int64_t i = 0; i < P; ++i)
                    for (int64_t k = 0; k < K; ++k) {
                        const double av = ta2[i * K + k];
                        const double* grow = go.data.data() + i * Q;
                        double* brow = gb->data.data() + k * Q;
                        for (int64_t j = 0; j < Q; ++j) brow[j] += av * grow[j];
                    }
            }
        }, "matmul");
    }

    // 1x1 convolution: x [Cin, spatial...], w [Cout, Cin], b [Cout]
    Value affine_pointwise(Value x, Value w, Value b) {
        const Shape &sx = shape(x), &sw = shape(w), &sb = shape(b);
        if (sx.size() < 2 || sw.size() != 2 || sw[1] != sx[0] || sb.size() != 1 || sb[0] != sw[0])
            throw ContractViolation("affine_pointwise: incompatible shapes x=" + shape_str(sx) +
                                    " w=" + shape_str(sw) + " b=" + shape_str(sb));
        const int64_t cin = sx[0], cout = sw[0];
        const int64_t pos = val(x).numel() / cin;
        Shape os = sx;
        os[0] = cout;
        Tensor out(os);
        const Tensor &tx = val(x), &tw = val(w), &tb = val(b);
        for (int64_t co = 0; co < cout; ++co) {
            double* orow = out.data.data() + co * pos;
            std::fill_n(orow, pos, tb[co]);
            for (int64_t ci = 0; ci < cin; ++ci) {
                const double wv = tw[co * cin + ci];
                const double* xrow = tx.data.data() + ci * pos;
                for (int64_t p = 0; p < pos; ++p) orow[p] += wv * xrow[p];
            }
        }
        return push(std::move(out), {x.id, w.id, b.id}, rg(x) || rg(w) || rg(b),
                    [x, w, b, cin, cout, pos](Graph& g, int self) {
            const Tensor& go = g.nodes_[self].grad;
            const Tensor &tx2 = g.val(x), &tw2 = g.val(w);
            Tensor* gx = g.want(x);
            Tensor* gw = g.want(w);
            Tensor* gb = g.want(b);
            for (int64_t co = 0; co < cout; ++co) {
                const double* grow = go.data.data() + co * pos;
                if (gb) {
                    double acc = 0.0;
                    for (int64_t p = 0; p < pos; ++p) acc += grow[p];
                    (*gb)[co] += acc;
                }
                for (int64_t ci = 0; ci < cin; ++ci) {
                    const double* xrow = tx2.data.data() + ci * pos;
                    if (gw) {
                        double acc = 0.0;
                        for (int64_t p = 0; p < pos; ++p) acc += grow[p] * xrow[p];
                        (*gw)[co * cin + ci] += acc;
                    }
                    if (gx) {
                        const double wv = tw2[co * cin + ci];
                        double* xg = gx->data.data() + ci * pos;
                        for (int64_t p = 0; p < pos; ++p) xg[p] += wv * grow[p];
                    }
                }
            }
        }, "affine_pointwise");
    }

    // ---- convolutions ----

    Value conv1d(Value x, Value w, int64_t stride, int64_t pad) {
        const Shape &sx = shape(x), &sw = shape(w);
        conv_checks(sx, sw, stride, pad, 3, "conv1d");
        if (sw[1] != sx[0])
            throw ContractViolation("conv1d: channel mismatch x=" + shape_str(sx) + " w=" + shape_str(sw));
        const int64_t cin = sx[0], len = sx[1], cout = sw[0], k = sw[2];
        if (k > len + 2 * pad) throw ContractViolation("conv1d: kernel longer than padded input");
        const int64_t olen = convdetail::conv_out_len(len, k, stride, pad);
        Tensor out({cout, olen});
        convdetail::conv1d_fwd(val(x).data.data(), cin, len, val(w).data.data(), cout, k, stride, pad,
                               out.data.data(), olen);
        return push(std::move(out), {x.id, w.id}, rg(x) || rg(w),
                    [x, w, cin, len, cout, k, stride, pad, olen](Graph& g, int self) {
            const Tensor& go = g.nodes_[self].grad;
            if (Tensor* gx = g.want(x))
                convdetail::conv1d_bwd_input(go.data.data(), cout, olen, g.val(w).data.data(), cin, k, stride, pad,
                                             gx->data.data(), len);
            if (Tensor* gw = g.want(w))
                convdetail::conv1d_bwd_weight(go.data.data(), cout, olen, g.val(x).data.data(), cin, len, k, stride,
                                              pad, gw->data.data());
        }, "conv1d");
    }

    // filters [Cin, Cout, K]; adjoint of conv1d with the same stride/padding
    Value conv_transpose1d(Value x, Value w, int64_t stride, int64_t pad, int64_t out_pad = 0) {
        const Shape &sx = shape(x), &sw = shape(w);
        conv_checks(sx, sw, stride, pad, 3, "conv_transpose1d");
        if (sw[0] != sx[0])
            throw ContractViolation("conv_transpose1d: channel mismatch x=" + shape_str(sx) + " w=" + shape_str(sw));
        if (out_pad < 0 || out_pad >= stride) throw ContractViolation("conv_transpose1d: bad output padding");
        const int64_t cin = sx[0], len = sx[1], cout = sw[1], k = sw[2];
        const int64_t olen = convdetail::convt_out_len(len, k, stride, pad, out_pad);
        if (olen < 1) throw ContractViolation("conv_transpose1d: empty output");
        Tensor out({cout, olen});
        convdetail::convt1d_fwd(val(x).data.data(), cin, len, val(w).data.data(), cout, k, stride, pad,
                                out.data.data(), olen);
        return push(std::move(out), {x.id, w.id}, rg(x) || rg(w),
                    [x, w, cin, len, cout, k, stride, pad, olen](Graph& g, int self) {
            const Tensor& go = g.nodes_[self].grad;
            if (Tensor* gx = g.want(x))
                convdetail::convt1d_bwd_input(go.data.data(), cout, olen, g.val(w).data.data(), cin, k, stride, pad,
                                              gx->data.data(), len);
            if (Tensor* gw = g.want(w))
                convdetail::convt1d_bwd_weight(go.data.data(), cout, olen, g.val(x).data.data(), cin, len, k, stride,
                                               pad, gw->data.data());
        }, "conv_transpose1d");
    }

    Value conv2d(Value x, Value w, int64_t stride, int64_t pad) {
        const Shape &sx = shape(x), &sw = shape(w);
        conv_checks(sx, sw, stride, pad, 4, "conv2d");
        if (sw[1] != sx[0])
            throw ContractViolation("conv2d: channel mismatch x=" + shape_str(sx) + " w=" + shape_str(sw));
        const int64_t cin = sx[0], h = sx[1], wd = sx[2], cout = sw[0], kh = sw[2], kw = sw[3];
        if (kh > h + 2 * pad || kw > wd + 2 * pad) throw ContractViolation("conv2d: kernel larger than padded input");
        const int64_t oh = convdetail::conv_out_len(h, kh, stride, pad);
        const int64_t ow = convdetail::conv_out_len(wd, kw, stride, pad);
        Tensor out({cout, oh, ow});
        convdetail::conv2d_fwd(val(x).data.data(), cin, h, wd, val(w).data.data(), cout, kh, kw, stride, pad,
                               out.data.data(), oh, ow);
        return push(std::move(out), {x.id, w.id}, rg(x) || rg(w),
                    [x, w, cin, h, wd, cout, kh, kw, stride, pad, oh, ow](Graph& g, int self) {
            const Tensor& go = g.nodes_[self].grad;
            if (Tensor* gx = g.want(x))
                convdetail::conv2d_bwd_input(go.data.data(), cout, oh, ow, g.val(w).data.data(), cin, kh, kw, stride,
                                             pad, gx->data.data(), h, wd);
            if (Tensor* gw = g.want(w))
                convdetail::conv2d_bwd_weight(go.data.data(), cout, oh, ow, g.val(x).data.data(), cin, h, wd, kh, kw,
                                              stride, pad, gw->data.data());
        }, "conv2d");
    }

    Value conv_transpose2d(Value x, Value w, int64_t stride, int64_t pad, int64_t out_pad = 0) {
        const Shape &sx = shape(x), &sw = shape(w);
        conv_checks(sx, sw, stride, pad, 4, "conv_transpose2d");
        if (sw[0] != sx[0])
            throw ContractViolation("conv_transpose2d: channel mismatch x=" + shape_str(sx) + " w=" + shape_str(sw));
        if (out_pad < 0 || out_pad >= stride) throw ContractViolation("conv_transpose2d: bad output padding");
        const int64_t cin = sx[0], h = sx[1], wd = sx[2], cout = sw[1], kh = sw[2], kw = sw[3];
        const int64_t oh = convdetail::convt_out_len(h, kh, stride, pad, out_pad);
        const int64_t ow = convdetail::convt_out_len(wd, kw, stride, pad, out_pad);
        if (oh < 1 || ow < 1) throw ContractViolation("conv_transpose2d: empty output");
        Tensor out({cout, oh, ow});
        convdetail::convt2d_fwd(val(x).data.data(), cin, h, wd, val(w).data.data(), cout, kh, kw, stride, pad,
                                out.data.data(), oh, ow);
        return push(std::move(out), {x.id, w.id}, rg(x) || rg(w),
                    [x, w, cin, h, wd, cout, kh, kw, stride, pad, oh, ow](Graph& g, int self) {
            const Tensor& go = g.nodes_[self].grad;
            if (Tensor* gx = g.want(x))
                convdetail::convt2d_bwd_input(go.data.data(), cout, oh, ow, g.val(w).data.data(), cin, kh, kw, stride,
                                              pad, gx->data.data(), h, wd);
            if (Tensor* gw = g.want(w))
                convdetail::convt2d_bwd_weight(go.data.data(), cout, oh, ow, g.val(x).data.data(), cin, h, wd, kh, kw,
                                               stride, pad, gw->data.data());
        }, "conv_transpose2d");
    }

    // ---- backward ----

    void backward(Value loss) {
        const int lid = check(loss);
        if (nodes_[lid].value.numel() != 1)
            throw ContractViolation("backward: loss must be scalar, got shape " + shape_str(nodes_[lid].value.shape));
        // zero-initialize accumulators for this pass
        for (Node& n : nodes_) n.grad = Tensor();
        if (!nodes_[lid].requires_grad) return;  // loss independent of every parameter
        // mark nodes on a path from the loss to some parameter
        std::vector<char> reach(nodes_.size(), 0);
        std::vector<int> stack{lid};
        reach[lid] = 1;
        while (!stack.empty()) {
            int id = stack.back();
            stack.pop_back();
            for (int in : nodes_[id].inputs)
                if (in >= 0 && !reach[in] && nodes_[in].requires_grad) {
                    reach[in] = 1;
                    stack.push_back(in);
                }
        }
        grad_buf(lid)[0] = 1.0;
        for (int id = lid; id >= 0; --id)
            if (reach[id] && nodes_[id].backprop) nodes_[id].backprop(*this, id);
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::vector<int> inputs;
        std::function<void(Graph&, int)> backprop;
    };

    std::vector<Node> nodes_;

    int check(Value v) const {
        if (v.g != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
            throw ContractViolation("Value does not belong to this graph");
        return v.id;
    }
    const Tensor& val(Value v) const { return nodes_[check(v)].value; }
    const Shape& shape(Value v) const { return val(v).shape; }
    bool rg(Value v) const { return nodes_[check(v)].requires_grad; }

    Tensor& grad_buf(int id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.grad.numel() != n.value.numel()) n.grad = Tensor::zeros(n.value.shape);
        return n.grad;
    }

    // gradient buffer if this input participates in the pass, else null
    Tensor* want(Value v) {
        Node& n = nodes_[static_cast<size_t>(v.id)];
        if (!n.requires_grad) return nullptr;
        return &grad_buf(v.id);
    }

    Value push(Tensor t, std::vector<int> inputs, bool requires_grad, std::function<void(Graph&, int)> backprop,
               const char* opname = nullptr) {
        if (opname) check_finite(t, opname);
        Node n;
        n.value = std::move(t);
        n.requires_grad = requires_grad;
        n.inputs = std::move(inputs);
        if (requires_grad) n.backprop = std::move(backprop);
        nodes_.push_back(std::move(n));
        return Value{this, static_cast<int>(nodes_.size()) - 1};
    }

    template <typename F, typename B>
    Value unary(Value a, const char* name, F f, B adj) {
        const Tensor& ta = val(a);
        Tensor out(ta.shape);
        for (int64_t i = 0; i < ta.numel(); ++i) out[i] = f(ta[i]);
        return push(std::move(out), {a.id}, rg(a), [a, adj](Graph& g, int self) {
            if (Tensor* ga = g.want(a)) {
                const Tensor& go = g.nodes_[self].grad;
                const Tensor &tx = g.val(a), &ty = g.nodes_[self].value;
                for (int64_t i = 0; i < go.numel(); ++i) (*ga)[i] += adj(tx[i], ty[i], go[i]);
            }
        }, name);
    }

    Value reduce(Value a, int axis, bool take_mean) {
        const Shape& s = shape(a);
        const int r = static_cast<int>(s.size());
        if (axis < 0 || axis >= r) throw ContractViolation("reduce: bad axis for shape " + shape_str(s));
        int64_t outer = 1, inner = 1;
        for (int d = 0; d < axis; ++d) outer *= s[static_cast<size_t>(d)];
        for (int d = axis + 1; d < r; ++d) inner *= s[static_cast<size_t>(d)];
        const int64_t mid = s[static_cast<size_t>(axis)];
        Shape os;
        for (int d = 0; d < r; ++d)
            if (d != axis) os.push_back(s[static_cast<size_t>(d)]);
        if (os.empty()) os = {1};
        Tensor out(os);
        const Tensor& ta = val(a);
        const double scale = take_mean ? 1.0 / static_cast<double>(mid) : 1.0;
        for (int64_t ou = 0; ou < outer; ++ou)
            for (int64_t m = 0; m < mid; ++m) {
                const double* src = ta.data.data() + (ou * mid + m) * inner;
                double* dst = out.data.data() + ou * inner;
                for (int64_t i = 0; i < inner; ++i) dst[i] += src[i] * scale;
            }
        return push(std::move(out), {a.id}, rg(a), [a, outer, mid, inner, scale](Graph& g, int self) {
            if (Tensor* ga = g.want(a)) {
                const Tensor& go = g.nodes_[self].grad;
                for (int64_t ou = 0; ou < outer; ++ou)
                    for (int64_t m = 0; m < mid; ++m) {
                        double* dst = ga->data.data() + (ou * mid + m) * inner;
                        const double* src = go.data.data() + ou * inner;
                        for (int64_t i = 0; i < inner; ++i) dst[i] += src[i] * scale;
                    }
            }
        }, take_mean ? "mean" : "sum");
    }

    static void conv_checks(const Shape& sx, const Shape& sw, int64_t stride, int64_t pad, int rank,
                            const char* name) {
        if (static_cast<int>(sx.size()) != rank - 1 || static_cast<int>(sw.size()) != rank)
            throw ContractViolation(std::string(name) + ": bad ranks x=" + shape_str(sx) + " w=" + shape_str(sw));
        if (stride < 1) throw ContractViolation(std::string(name) + ": stride must be >= 1");
        if (pad < 0) throw ContractViolation(std::string(name) + ": negative padding");
    }
};

inline const Tensor& Value::val() const { return g->value(*this); }

// central-difference check of reverse-mode gradients; evaluation is 64-bit
// throughout, error is normalized by max(1, |analytic|, |numeric|)
inline double grad_check(const std::function<Value(Graph&, Value)>& fn, const Tensor& point, double eps) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) throw ContractViolation("grad_check: eps outside [1e-7, 1e-3]");
    Graph g;
    Value p = g.param(point);
    Value loss = fn(g, p);
    if (g.value(loss).numel() != 1) throw ContractViolation("grad_check: fn must produce a scalar");
    g.backward(loss);
    const Tensor analytic = g.grad_of(p);

    auto eval = [&fn](const Tensor& x) {
        Graph h;
        Value q = h.param(x);
        Value l = fn(h, q);
        return h.value(l)[0];
    };

    double worst = 0.0;
    for (int64_t i = 0; i < point.numel(); ++i) {
        Tensor hi = point, lo = point;
        hi[i] += eps;
        lo[i] -= eps;
        const double numeric = (eval(hi) - eval(lo)) / (2.0 * eps);
        const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

}  // namespace npprov
