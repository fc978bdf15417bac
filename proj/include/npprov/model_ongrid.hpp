#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "npprov/graph.hpp"
#include "npprov/io.hpp"
#include "npprov/model_offgrid.hpp"
#include "npprov/params.hpp"
#include "npprov/rng.hpp"
#include "npprov/tensor.hpp"

namespace npprov {

// values [C,H,W] in [0,1]; mask [1,H,W] with 1 marking revealed pixels
struct MaskedImage {
    Tensor values;
    Tensor mask;
};

inline void check_masked_image(const MaskedImage& img) {
    if (img.values.rank() != 3 || img.mask.rank() != 3 || img.mask.shape[0] != 1 ||
        img.mask.shape[1] != img.values.shape[1] || img.mask.shape[2] != img.values.shape[2])
        throw ContractViolation("MaskedImage: shapes disagree, values " + shape_str(img.values.shape) + " mask " +
                                shape_str(img.mask.shape));
    for (double v : img.mask.data)
        if (v != 0.0 && v != 1.0) throw ContractViolation("MaskedImage: mask must be binary");
}

// revealed-pixel count uniform over [ceil(n/100), floor(n/2)], pixels chosen
// uniformly without replacement
inline Tensor sample_mask(int64_t h, int64_t w, uint64_t seed, uint64_t task_index) {
    if (h < 1 || w < 1) throw ContractViolation("sample_mask: bad image size");
    const int64_t n = h * w;
    const int64_t lo = (n + 99) / 100, hi = n / 2;
    if (lo > hi) throw ContractViolation("sample_mask: image too small for the revealing-rate range");
    CounterRng rng(seed, task_index, rng_stream::kMask);
    const int64_t n_ctx = rng.uniform_int(lo, hi);
    std::vector<int64_t> idx(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    for (int64_t i = 0; i < n_ctx; ++i)
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(rng.uniform_int(i, n - 1))]);
    Tensor mask({1, h, w});
    for (int64_t i = 0; i < n_ctx; ++i) mask[idx[static_cast<size_t>(i)]] = 1.0;
    return mask;
}

struct OnGridModel {
    ParamStore params;
};

namespace ongrid_detail {

inline constexpr int kLevels = 4;
inline constexpr int64_t kKernel = 3;
inline constexpr int64_t kBase = 16;
inline constexpr int64_t kMaskChannels = 8;

inline int64_t pad_to_multiple(int64_t v, int64_t m) { return (v + m - 1) / m * m; }

}  // namespace ongrid_detail

inline OnGridModel make_ongrid_model(uint64_t seed) {
    using namespace ongrid_detail;
    OnGridModel m;
    CounterRng rng(seed, 1, rng_stream::kInit);
    ParamStore& ps = m.params;
    // mask autoencoder starts at an exact identity (center tap 1)
    Tensor we({kMaskChannels, 1, kKernel, kKernel});
    for (int64_t c = 1; c < kMaskChannels; ++c) {
        Tensor t = init_uniform({1, 1, kKernel, kKernel}, kKernel * kKernel, rng);
        for (int64_t i = 0; i < t.numel(); ++i) we[c * kKernel * kKernel + i] = t[i];
    }
    we.at({0, 0, 1, 1}) = 1.0;
    ps.add("psi_e.w", std::move(we));
    ps.add("psi_e.b", Tensor({kMaskChannels}));
    Tensor wd({1, kMaskChannels, kKernel, kKernel});
    wd.at({0, 0, 1, 1}) = 1.0;
    ps.add("psi_d.w", std::move(wd));
    ps.add("psi_d.b", Tensor({1}));
    ps.add("psi_cross.w", init_uniform({kMaskChannels, 2, kKernel, kKernel}, 2 * kKernel * kKernel, rng));
    ps.add("psi_cross.b", Tensor({kMaskChannels}));

    std::vector<int64_t> enc_out;
    for (int lvl = 1; lvl <= kLevels; ++lvl) {
        const int64_t cin = lvl == 1 ? 2 * kMaskChannels : enc_out.back();
        const int64_t cout = lvl == 1 ? kBase : enc_out.back() * 2;
        ps.add("unet.enc" + std::to_string(lvl) + ".w",
               init_uniform({cout, cin, kKernel, kKernel}, cin * kKernel * kKernel, rng));
        ps.add("unet.enc" + std::to_string(lvl) + ".b", Tensor({cout}));
        enc_out.push_back(cout);
    }
    for (int lvl = 1; lvl <= kLevels; ++lvl) {
        const int64_t cin = lvl == 1 ? enc_out.back() : 2 * enc_out[static_cast<size_t>(kLevels - lvl)];
        const int64_t cout = lvl == kLevels ? kBase : enc_out[static_cast<size_t>(kLevels - lvl) - 1];
        ps.add("unet.dec" + std::to_string(lvl) + ".w",
               init_uniform({cin, cout, kKernel, kKernel}, cin * kKernel * kKernel, rng));
        ps.add("unet.dec" + std::to_string(lvl) + ".b", Tensor({cout}));
    }
    ps.add("psi_mu.w", init_uniform({1, kBase}, kBase, rng));
    ps.add("psi_mu.b", Tensor({1}));
    ps.add("psi_ss.w", init_uniform({kMaskChannels, 1}, 1, rng));
    ps.add("psi_ss.b", Tensor({kMaskChannels}));
    ps.add("psi_sigma.w", init_uniform({1, kBase + kMaskChannels}, kBase + kMaskChannels, rng));
    ps.add("psi_sigma.b", Tensor({1}));
    return m;
}

namespace ongrid_detail {

inline Value pad_hw(Graph& g, Value x, int64_t bh, int64_t ah, int64_t bw, int64_t aw) {
    return g.pad_axis(g.pad_axis(x, 1, bh, ah), 2, bw, aw);
}

inline Value conv3x3(Graph& g, Value x, const BoundParams& p, const std::string& name) {
    Value w = p[name + ".w"];
    Value b = p[name + ".b"];
    const int64_t cout = g.value(w).shape[0];
    return g.add(g.conv2d(x, w, 1, 1), g.reshape(b, {cout, 1, 1}));
}

inline Value unet2d(Graph& g, Value h, const BoundParams& p) {
    std::vector<Value> acts;
    Value a = h;
    for (int lvl = 1; lvl <= kLevels; ++lvl) {
        Value w = p["unet.enc" + std::to_string(lvl) + ".w"];
        Value b = p["unet.enc" + std::to_string(lvl) + ".b"];
        const int64_t cout = g.value(w).shape[0];
        a = g.relu(g.add(g.conv2d(a, w, 2, 1), g.reshape(b, {cout, 1, 1})));
        acts.push_back(a);
    }
    Value d = acts.back();
    for (int lvl = 1; lvl <= kLevels; ++lvl) {
        Value w = p["unet.dec" + std::to_string(lvl) + ".w"];
        Value b = p["unet.dec" + std::to_string(lvl) + ".b"];
        const int64_t cout = g.value(w).shape[1];
        d = g.add(g.conv_transpose2d(d, w, 2, 1, 1), g.reshape(b, {cout, 1, 1}));
        if (lvl < kLevels) {
            d = g.relu(d);
            d = g.concat({d, acts[static_cast<size_t>(kLevels - lvl) - 1]}, 0);
        }
    }
    return d;
}

}  // namespace ongrid_detail

struct OnGridOutputs {
    Value mean;   // [C,H,W]
    Value std;    // [C,H,W]
    Value recon;  // scalar
};

// Mean reads mask and masked values; std reads the mask alone. Inputs are
// zero-padded to a stride-friendly size and outputs cropped back.
inline OnGridOutputs ongrid_forward(Graph& g, const OnGridModel&, const BoundParams& p, const MaskedImage& img) {
    using namespace ongrid_detail;
    check_masked_image(img);
    const int64_t c = img.values.shape[0], h = img.values.shape[1], w = img.values.shape[2];
    const int64_t ph = pad_to_multiple(h, 1 << kLevels), pw = pad_to_multiple(w, 1 << kLevels);
    const int64_t bh = (ph - h) / 2, bw = (pw - w) / 2;

    Value mask = pad_hw(g, g.constant(img.mask), bh, ph - h - bh, bw, pw - w - bw);
    Tensor mv(img.values.shape);
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t i = 0; i < h * w; ++i) mv[ch * h * w + i] = img.values[ch * h * w + i] * img.mask[i];
    Value masked_values = pad_hw(g, g.constant(std::move(mv)), bh, ph - h - bh, bw, pw - w - bw);

    Value h_self = conv3x3(g, mask, p, "psi_e");
    Value mask_recon = conv3x3(g, h_self, p, "psi_d");
    Value recon_diff = g.sub(g.slice(g.slice(mask_recon, 1, bh, h), 2, bw, w), g.constant(img.mask));
    Value recon = g.mean_all(g.mul(recon_diff, recon_diff));

    Value h_cross = conv3x3(g, g.concat({mask, masked_values}, 0), p, "psi_cross");
    Value r = unet2d(g, g.concat({h_self, h_cross}, 0), p);
    Value mu_full = g.affine_pointwise(r, p["psi_mu.w"], p["psi_mu.b"]);

    Value h_cross_v = conv3x3(g, g.concat({mask, mask}, 0), p, "psi_cross");
    Value rv = unet2d(g, g.concat({h_self, h_cross_v}, 0), p);
    // target mask: every pixel of the original region is a target
    Tensor tgt({1, h, w});
    std::fill(tgt.data.begin(), tgt.data.end(), 1.0);
    Value target_mask = pad_hw(g, g.constant(std::move(tgt)), bh, ph - h - bh, bw, pw - w - bw);
    Value h_ss = g.affine_pointwise(target_mask, p["psi_ss.w"], p["psi_ss.b"]);
    Value pre = g.affine_pointwise(g.concat({rv, h_ss}, 0), p["psi_sigma.w"], p["psi_sigma.b"]);
    Value std_full = g.add(g.softplus(pre), g.constant(Tensor::scalar(kSigmaFloor)));

    OnGridOutputs out;
    out.mean = g.slice(g.slice(mu_full, 1, bh, h), 2, bw, w);
    out.std = g.slice(g.slice(std_full, 1, bh, h), 2, bw, w);
    out.recon = recon;
    return out;
}

inline Tensor ongrid_mean(const OnGridModel& m, const MaskedImage& img) {
    Graph g;
    BoundParams p = bind_params(g, m.params);
    return g.value(ongrid_forward(g, m, p, img).mean);
}

// Signature admits the mask only: pixel values cannot influence the result.
inline Tensor ongrid_variance(const OnGridModel& m, const Tensor& mask) {
    MaskedImage img;
    img.mask = mask;
    img.values = Tensor({1, mask.shape[1], mask.shape[2]});
    Graph g;
    BoundParams p = bind_params(g, m.params);
    return g.value(ongrid_forward(g, m, p, img).std);
}

inline double ongrid_loss(const MaskedImage& img, const Tensor& mean, const Tensor& std, double recon_loss) {
    // flatten to one axis; gaussian_loglik averages per pixel
    Tensor yf({img.values.numel()}, img.values.data);
    GaussianPrediction pf{Tensor({mean.numel()}, mean.data), Tensor({std.numel()}, std.data)};
    return -gaussian_loglik(yf, pf) + recon_loss;
}

// ---- IDX image container ----

// big-endian u32 magic 0x00000803, dims (count, rows, cols), raw bytes
inline std::vector<Tensor> load_idx_images(const std::string& path) {
    const std::string raw = read_file(path, true);
    auto need = [&](size_t offset, size_t count) {
        if (offset + count > raw.size())
            throw ParseError("'" + path + "': truncated at offset " + std::to_string(raw.size()) + ", need " +
                             std::to_string(offset + count) + " bytes");
    };
    auto be32 = [&](size_t offset) {
        need(offset, 4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<uint8_t>(raw[offset + static_cast<size_t>(i)]);
        return v;
    };
    const uint32_t magic = be32(0);
    if (magic != 0x00000803u)
        throw ParseError("'" + path + "': bad magic at offset 0 (got 0x" + [magic] {
                             char buf[16];
                             std::snprintf(buf, sizeof buf, "%08x", magic);
                             return std::string(buf);
                         }() + ", want 0x00000803)");
    const uint32_t count = be32(4), rows = be32(8), cols = be32(12);
    if (rows == 0 || cols == 0) throw ParseError("'" + path + "': zero image dimensions");
    const size_t pixels = static_cast<size_t>(rows) * cols;
    need(16, static_cast<size_t>(count) * pixels);
    std::vector<Tensor> out;
    out.reserve(count);
    size_t off = 16;
    for (uint32_t i = 0; i < count; ++i) {
        Tensor img({1, static_cast<int64_t>(rows), static_cast<int64_t>(cols)});
        for (size_t j = 0; j < pixels; ++j) img[static_cast<int64_t>(j)] = static_cast<uint8_t>(raw[off + j]) / 255.0;
        off += pixels;
        out.push_back(std::move(img));
    }
    return out;
}

}  // namespace npprov
