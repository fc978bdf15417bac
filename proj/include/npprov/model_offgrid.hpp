#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "npprov/graph.hpp"
#include "npprov/params.hpp"
#include "npprov/task.hpp"
#include "npprov/tensor.hpp"

namespace npprov {

inline constexpr double kSigmaFloor = 1e-3;
inline constexpr double kDensityEps = 1e-8;

// architecture widths
inline constexpr int64_t kSelfChannels = 8;   // context self-correlation channels
inline constexpr int64_t kEncChannels = 16;   // fused encoding / UNet width
inline constexpr int64_t kGridSelfChannels = 8;
inline constexpr int kUnetLevels = 6;
inline constexpr int64_t kUnetKernel = 5;

struct GridSpec {
    int points_per_unit = 64;
    double margin = 0.1;
};

// Uniform grid over the padded range of all positions. The point count is a
// multiple of 64 so six stride-2 halvings stay integral.
inline Tensor build_grid(const Tensor& x_all, const GridSpec& gs) {
    if (x_all.numel() < 1) throw ContractViolation("build_grid: empty positions");
    if (gs.points_per_unit < 1) throw ContractViolation("build_grid: points_per_unit must be positive");
    double mn = x_all[0], mx = x_all[0];
    for (int64_t i = 1; i < x_all.numel(); ++i) {
        mn = std::min(mn, x_all[i]);
        mx = std::max(mx, x_all[i]);
    }
    const double lo = mn - gs.margin;
    const double range = (mx + gs.margin) - lo;
    const double ppu = static_cast<double>(gs.points_per_unit);
    int64_t t = static_cast<int64_t>(std::ceil(range * ppu));
    t = std::max<int64_t>(t, 1);
    t = (t + 63) / 64 * 64;
    while (static_cast<double>(t - 1) / ppu < range) t += 64;  // cover the padded range
    Tensor grid({t});
    const double spacing = 1.0 / ppu;
    for (int64_t j = 0; j < t; ++j) grid[j] = lo + static_cast<double>(j) * spacing;
    return grid;
}

enum class OffGridKind { NpProv, ConvCnp };

inline const char* offgrid_kind_name(OffGridKind k) { return k == OffGridKind::NpProv ? "np-prov" : "convcnp"; }

struct OffGridModel {
    OffGridKind kind = OffGridKind::NpProv;
    GridSpec grid;
    ParamStore params;
};

struct Prediction {
    Tensor mean;  // [M]
    Tensor std;   // [M], >= kSigmaFloor
    double recon_loss = 0.0;
};

namespace offgrid_detail {

inline void add_unet_params(ParamStore& ps, CounterRng& rng) {
    // encoder doubles channels from the base width; decoder consumes the
    // concatenation of its input and the mirrored encoder activation
    int64_t ch = kEncChannels;
    std::vector<int64_t> enc_out;
    for (int lvl = 1; lvl <= kUnetLevels; ++lvl) {
        const int64_t cin = lvl == 1 ? kEncChannels : enc_out.back();
        const int64_t cout = lvl == 1 ? ch : enc_out.back() * 2;
        ps.add("unet.enc" + std::to_string(lvl) + ".w", init_uniform({cout, cin, kUnetKernel}, cin * kUnetKernel, rng));
        ps.add("unet.enc" + std::to_string(lvl) + ".b", Tensor({cout}));
        enc_out.push_back(cout);
    }
    for (int lvl = 1; lvl <= kUnetLevels; ++lvl) {
        // decoder level i maps to the resolution of encoder level (levels - i)
        const int64_t cin = lvl == 1 ? enc_out.back() : 2 * enc_out[static_cast<size_t>(kUnetLevels - lvl + 1) - 1];
        const int64_t cout = lvl == kUnetLevels ? kEncChannels : enc_out[static_cast<size_t>(kUnetLevels - lvl) - 1];
        ps.add("unet.dec" + std::to_string(lvl) + ".w", init_uniform({cin, cout, kUnetKernel}, cin * kUnetKernel, rng));
        ps.add("unet.dec" + std::to_string(lvl) + ".b", Tensor({cout}));
    }
}

}  // namespace offgrid_detail

inline OffGridModel make_offgrid_model(OffGridKind kind, uint64_t seed, GridSpec grid = {}) {
    OffGridModel m;
    m.kind = kind;
    m.grid = grid;
    CounterRng rng(seed, 0, rng_stream::kInit);
    ParamStore& ps = m.params;
    const double ell0 = 2.0 / static_cast<double>(grid.points_per_unit);
    ps.add("log_ell_enc", Tensor::scalar(std::log(ell0)));
    ps.add("log_ell_dec", Tensor::scalar(std::log(ell0)));
    if (kind == OffGridKind::NpProv) {
        // the reconstruction kernel starts narrow and the channel maps start
        // at an exact identity so the autoencoder reproduces y from step one
        ps.add("log_ell_self", Tensor::scalar(std::log(0.01)));
        Tensor we = init_uniform({kSelfChannels, 1}, 1, rng);
        we[0] = 1.0;
        ps.add("psi_e.w", std::move(we));
        ps.add("psi_e.b", Tensor({kSelfChannels}));
        Tensor wd({1, kSelfChannels});
        wd[0] = 1.0;
        ps.add("psi_d.w", std::move(wd));
        ps.add("psi_d.b", Tensor({1}));
        ps.add("psi_t.w", init_uniform({kEncChannels, kSelfChannels + 2}, kSelfChannels + 2, rng));
        ps.add("psi_t.b", Tensor({kEncChannels}));
    } else {
        ps.add("psi_t.w", init_uniform({kEncChannels, 2}, 2, rng));
        ps.add("psi_t.b", Tensor({kEncChannels}));
    }
    offgrid_detail::add_unet_params(ps, rng);
    ps.add("psi_mu.w", init_uniform({1, kEncChannels}, kEncChannels, rng));
    ps.add("psi_mu.b", Tensor({1}));
    if (kind == OffGridKind::NpProv) {
        ps.add("psi_v.w", init_uniform({1, 1}, 1, rng));
        ps.add("psi_v.b", Tensor({1}));
        ps.add("psi_tt.w", init_uniform({kGridSelfChannels, 1}, 1, rng));
        ps.add("psi_tt.b", Tensor({kGridSelfChannels}));
        ps.add("psi_sigma.w",
               init_uniform({1, kEncChannels + kGridSelfChannels}, kEncChannels + kGridSelfChannels, rng));
        ps.add("psi_sigma.b", Tensor({1}));
    } else {
        ps.add("psi_sigma.w", init_uniform({1, kEncChannels}, kEncChannels, rng));
        ps.add("psi_sigma.b", Tensor({1}));
    }
    return m;
}

// ---- graph-building blocks ----

// K_ij = exp(-0.5 (a_i - b_j)^2 / ell^2) with ell = exp(log_ell)
inline Value setconv_kernel(Graph& g, const Tensor& a, const Tensor& b, Value log_ell) {
    if (a.rank() != 1 || b.rank() != 1) throw ContractViolation("setconv_kernel: positions must be 1-D");
    const int64_t p = a.numel(), q = b.numel();
    Tensor d2({p, q});
    for (int64_t i = 0; i < p; ++i)
        for (int64_t j = 0; j < q; ++j) {
            const double d = a[i] - b[j];
            d2[i * q + j] = d * d;
        }
    Value scale = g.mul(g.exp(g.mul(log_ell, g.constant(Tensor::scalar(-2.0)))), g.constant(Tensor::scalar(-0.5)));
    return g.exp(g.mul(g.constant(std::move(d2)), scale));
}

// num/den where den exceeds kDensityEps, exact zero elsewhere; the mask is a
// constant of the current forward values, so gradients match the guarded map
inline Value safe_div(Graph& g, Value num, Value den) {
    const Tensor& dv = g.value(den);
    Tensor mask(dv.shape), fill(dv.shape);
    for (int64_t i = 0; i < dv.numel(); ++i) {
        mask[i] = dv[i] > kDensityEps ? 1.0 : 0.0;
        fill[i] = 1.0 - mask[i];
    }
    Value m = g.constant(std::move(mask));
    return g.div(g.mul(num, m), g.add(den, g.constant(std::move(fill))));
}

struct AutoencodeResult {
    Value h_self;   // [C, N, N]
    Value y_tilde;  // [N]
    Value recon;    // scalar
};

// reconstructs context values through kernel-weighted channel maps and
// reports the mean squared reconstruction error
inline AutoencodeResult self_corr_autoencode(Graph& g, const Tensor& x, const Tensor& y, const BoundParams& p) {
    if (x.numel() < 1 || x.numel() != y.numel())
        throw ContractViolation("self_corr_autoencode: bad context shapes " + shape_str(x.shape) + " vs " +
                                shape_str(y.shape));
    const int64_t n = x.numel();
    Value k = setconv_kernel(g, x, x, p["log_ell_self"]);
    Tensor ycol({n, 1}, y.data);
    Value a = g.mul(k, g.constant(std::move(ycol)));  // row n scaled by y_n
    Value h_self = g.affine_pointwise(g.reshape(a, {1, n, n}), p["psi_e.w"], p["psi_e.b"]);
    Value weighted = g.mul(h_self, g.reshape(k, {1, n, n}));
    Value pooled = g.sum(weighted, 1);  // [C, N]
    Value y_tilde = g.reshape(g.affine_pointwise(pooled, p["psi_d.w"], p["psi_d.b"]), {n});
    Value diff = g.sub(g.constant(y), y_tilde);
    Value recon = g.mean_all(g.mul(diff, diff));
    return {h_self, y_tilde, recon};
}

// per-channel scalar summary of the self-correlation block
inline Value self_summary(Graph& g, Value h_self) { return g.mean(g.mean(h_self, 2), 1); }

// Projects (density, density-normalized values, broadcast self summary) onto
// the grid and fuses them channel-wise. `values` is [N]; pass the summary as
// an invalid Value for the two-channel baseline encoding.
inline Value cross_corr_encode(Graph& g, Value kt, Value values, Value self_term, const BoundParams& p) {
    const int64_t t = g.value(kt).shape[0];
    const int64_t n = g.value(kt).shape[1];
    Value density = g.reshape(g.sum(kt, 1), {1, t});
    Value val = g.reshape(g.matmul(kt, g.reshape(values, {n, 1})), {1, t});
    Value norm = safe_div(g, val, density);
    std::vector<Value> channels;
    if (self_term.valid()) {
        const int64_t c = g.value(self_term).numel();
        channels.push_back(g.expand(g.reshape(self_term, {c, 1}), {c, t}));
    }
    channels.push_back(density);
    channels.push_back(norm);
    return g.affine_pointwise(g.concat(channels, 0), p["psi_t.w"], p["psi_t.b"]);
}

// Six stride-2 convolutions (channels doubling from the base width), then six
// stride-2 transposed convolutions, each consuming the concatenation of its
// input and the matching encoder activation. ReLU everywhere but the last.
inline Value unet_apply(Graph& g, Value h, const BoundParams& p) {
    const Shape& s = g.value(h).shape;
    if (s.size() != 2 || s[1] % 64 != 0)
        throw ContractViolation("unet_apply: grid length must be a multiple of 64, got " + shape_str(s));
    const int64_t pad = (kUnetKernel - 1) / 2;
    std::vector<Value> acts;
    Value a = h;
    for (int lvl = 1; lvl <= kUnetLevels; ++lvl) {
        Value w = p["unet.enc" + std::to_string(lvl) + ".w"];
        Value b = p["unet.enc" + std::to_string(lvl) + ".b"];
        const int64_t cout = g.value(w).shape[0];
        a = g.relu(g.add(g.conv1d(a, w, 2, pad), g.reshape(b, {cout, 1})));
        acts.push_back(a);
    }
    Value d = acts.back();
    for (int lvl = 1; lvl <= kUnetLevels; ++lvl) {
        Value w = p["unet.dec" + std::to_string(lvl) + ".w"];
        Value b = p["unet.dec" + std::to_string(lvl) + ".b"];
        const int64_t cout = g.value(w).shape[1];
        d = g.add(g.conv_transpose1d(d, w, 2, pad, 1), g.reshape(b, {cout, 1}));
        if (lvl < kUnetLevels) {
            d = g.relu(d);
            d = g.concat({d, acts[static_cast<size_t>(kUnetLevels - lvl) - 1]}, 0);
        }
    }
    return d;
}

// density-normalized kernel smoothing of the grid representation onto the
// targets, then a channel-mixing map to the scalar mean
inline Value mean_head(Graph& g, Value r, Value kstar, const BoundParams& p) {
    const int64_t m = g.value(kstar).shape[1];
    Value s = g.matmul(r, kstar);
    Value dstar = g.reshape(g.sum(kstar, 0), {1, m});
    Value norm = safe_div(g, s, dstar);
    return g.reshape(g.affine_pointwise(norm, p["psi_mu.w"], p["psi_mu.b"]), {m});
}

// The position-only uncertainty pipeline: context and grid positions go in,
// a per-target standard deviation comes out. No function values anywhere in
// the signature, so any change of y leaves the output bit-identical.
inline Value variance_path(Graph& g, const Tensor& x, const Tensor& xt, Value kstar, const BoundParams& p) {
    const int64_t n = x.numel(), t = xt.numel(), m = g.value(kstar).shape[1];
    Value kt = setconv_kernel(g, xt, x, p["log_ell_enc"]);
    // grid-mass summary per context point stands in for the values
    Value colsum = g.reshape(g.sum(kt, 0), {1, n});
    Value h_ctx = g.reshape(g.affine_pointwise(colsum, p["psi_v.w"], p["psi_v.b"]), {n});
    // self-correlation summary recomputed from the kernel alone
    Value k_self = setconv_kernel(g, x, x, p["log_ell_self"]);
    Value h_self = g.affine_pointwise(g.reshape(k_self, {1, n, n}), p["psi_e.w"], p["psi_e.b"]);
    Value h = cross_corr_encode(g, kt, h_ctx, self_summary(g, h_self), p);
    Value r = unet_apply(g, h, p);
    // grid self-correlation channel
    Value ktt = setconv_kernel(g, xt, xt, p["log_ell_enc"]);
    Value h_tt = g.affine_pointwise(g.reshape(g.sum(ktt, 0), {1, t}), p["psi_tt.w"], p["psi_tt.b"]);
    Value pooled = g.matmul(g.concat({r, h_tt}, 0), kstar);
    Value pre = g.affine_pointwise(pooled, p["psi_sigma.w"], p["psi_sigma.b"]);
    return g.reshape(g.add(g.softplus(pre), g.constant(Tensor::scalar(kSigmaFloor))), {m});
}

struct OffGridOutputs {
    Value mean;   // [M]
    Value std;    // [M]
    Value recon;  // scalar
};

inline OffGridOutputs offgrid_forward(Graph& g, const OffGridModel& model, const BoundParams& p, const Task& task) {
    if (task.x_context.numel() < 1 || task.x_target.numel() < 1)
        throw ContractViolation("offgrid_forward: task needs at least one context and one target point");
    if (task.x_context.numel() != task.y_context.numel())
        throw ContractViolation("offgrid_forward: context shapes differ");
    std::vector<double> all(task.x_context.data);
    all.insert(all.end(), task.x_target.data.begin(), task.x_target.data.end());
    const Tensor xt = build_grid(Tensor::from(std::move(all)), model.grid);

    Value kstar = setconv_kernel(g, xt, task.x_target, p["log_ell_dec"]);
    Value kt = setconv_kernel(g, xt, task.x_context, p["log_ell_enc"]);

    OffGridOutputs out;
    if (model.kind == OffGridKind::NpProv) {
        AutoencodeResult ae = self_corr_autoencode(g, task.x_context, task.y_context, p);
        Value h = cross_corr_encode(g, kt, g.constant(task.y_context), self_summary(g, ae.h_self), p);
        Value r = unet_apply(g, h, p);
        out.mean = mean_head(g, r, kstar, p);
        out.std = variance_path(g, task.x_context, xt, kstar, p);
        out.recon = ae.recon;
    } else {
        Value h = cross_corr_encode(g, kt, g.constant(task.y_context), Value{}, p);
        Value r = unet_apply(g, h, p);
        out.mean = mean_head(g, r, kstar, p);
        const int64_t m = task.x_target.numel();
        Value pre = g.affine_pointwise(g.matmul(r, kstar), p["psi_sigma.w"], p["psi_sigma.b"]);
        out.std = g.reshape(g.add(g.softplus(pre), g.constant(Tensor::scalar(kSigmaFloor))), {m});
        out.recon = g.constant(Tensor::scalar(0.0));
    }
    return out;
}

inline Prediction predict(const OffGridModel& model, const Task& task) {
    Graph g;
    BoundParams p = bind_params(g, model.params);
    OffGridOutputs out = offgrid_forward(g, model, p, task);
    return {g.value(out.mean), g.value(out.std), g.value(out.recon)[0]};
}

}  // namespace npprov
