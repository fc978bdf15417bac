#pragma once

#include <algorithm>
#include <cstdint>

#include "npprov/tensor.hpp"

// Raw convolution loops shared by the graph primitives. All arrays are
// channel-first row-major; every routine accumulates into a pre-zeroed (or
// pre-filled) output so forward and adjoint passes use the same code shape.

namespace npprov::convdetail {

inline int64_t ceil_div(int64_t a, int64_t b) {  // b > 0
    return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}
inline int64_t floor_div(int64_t a, int64_t b) {  // b > 0
    return a >= 0 ? a / b : -((-a + b - 1) / b);
}

inline int64_t conv_out_len(int64_t len, int64_t k, int64_t stride, int64_t pad) {
    return (len + 2 * pad - k) / stride + 1;
}
inline int64_t convt_out_len(int64_t len, int64_t k, int64_t stride, int64_t pad, int64_t out_pad) {
    return (len - 1) * stride - 2 * pad + k + out_pad;
}

// valid output range [lo, hi] such that 0 <= ol*stride + k - pad < in_len
inline void tap_bounds(int64_t k, int64_t stride, int64_t pad, int64_t in_len, int64_t out_len, int64_t& lo,
                       int64_t& hi) {
    lo = std::max<int64_t>(0, ceil_div(pad - k, stride));
    hi = std::min<int64_t>(out_len - 1, floor_div(in_len - 1 - k + pad, stride));
}

// out[oc,ol] += sum_{ic,k} w[oc,ic,k] * x[ic, ol*s + k - p]
inline void conv1d_fwd(const double* x, int64_t cin, int64_t len, const double* w, int64_t cout, int64_t k,
                       int64_t stride, int64_t pad, double* out, int64_t olen) {
    for (int64_t oc = 0; oc < cout; ++oc) {
        double* orow = out + oc * olen;
        for (int64_t ic = 0; ic < cin; ++ic) {
            const double* xrow = x + ic * len;
            const double* wrow = w + (oc * cin + ic) * k;
            for (int64_t kk = 0; kk < k; ++kk) {
                const double wv = wrow[kk];
                int64_t lo, hi;
                tap_bounds(kk, stride, pad, len, olen, lo, hi);
                const double* xs = xrow + lo * stride + kk - pad;
                for (int64_t ol = lo; ol <= hi; ++ol, xs += stride) orow[ol] += wv * *xs;
            }
        }
    }
}

// gx[ic, ol*s + k - p] += sum_{oc,k} w[oc,ic,k] * gout[oc,ol]
inline void conv1d_bwd_input(const double* gout, int64_t cout, int64_t olen, const double* w, int64_t cin, int64_t k,
                             int64_t stride, int64_t pad, double* gx, int64_t len) {
    for (int64_t oc = 0; oc < cout; ++oc) {
        const double* grow = gout + oc * olen;
        for (int64_t ic = 0; ic < cin; ++ic) {
            double* xrow = gx + ic * len;
            const double* wrow = w + (oc * cin + ic) * k;
            for (int64_t kk = 0; kk < k; ++kk) {
                const double wv = wrow[kk];
                int64_t lo, hi;
                tap_bounds(kk, stride, pad, len, olen, lo, hi);
                double* xs = xrow + lo * stride + kk - pad;
                for (int64_t ol = lo; ol <= hi; ++ol, xs += stride) *xs += wv * grow[ol];
            }
        }
    }
}

// gw[oc,ic,k] += sum_ol gout[oc,ol] * x[ic, ol*s + k - p]
inline void conv1d_bwd_weight(const double* gout, int64_t cout, int64_t olen, const double* x, int64_t cin,
                              int64_t len, int64_t k, int64_t stride, int64_t pad, double* gw) {
    for (int64_t oc = 0; oc < cout; ++oc) {
        const double* grow = gout + oc * olen;
        for (int64_t ic = 0; ic < cin; ++ic) {
            const double* xrow = x + ic * len;
            double* wrow = gw + (oc * cin + ic) * k;
            for (int64_t kk = 0; kk < k; ++kk) {
                int64_t lo, hi;
                tap_bounds(kk, stride, pad, len, olen, lo, hi);
                const double* xs = xrow + lo * stride + kk - pad;
                double acc = 0.0;
                for (int64_t ol = lo; ol <= hi; ++ol, xs += stride) acc += grow[ol] * *xs;
                wrow[kk] += acc;
            }
        }
    }
}

// transposed convolution: out[oc, il*s + k - p] += x[ic,il] * w[ic,oc,k]
inline void convt1d_fwd(const double* x, int64_t cin, int64_t len, const double* w, int64_t cout, int64_t k,
                        int64_t stride, int64_t pad, double* out, int64_t olen) {
    for (int64_t ic = 0; ic < cin; ++ic) {
        const double* xrow = x + ic * len;
        for (int64_t oc = 0; oc < cout; ++oc) {
            double* orow = out + oc * olen;
            const double* wrow = w + (ic * cout + oc) * k;
            for (int64_t kk = 0; kk < k; ++kk) {
                const double wv = wrow[kk];
                int64_t lo, hi;
                tap_bounds(kk, stride, pad, olen, len, lo, hi);  // roles swapped: il indexes x
                double* os = orow + lo * stride + kk - pad;
                for (int64_t il = lo; il <= hi; ++il, os += stride) *os += wv * xrow[il];
            }
        }
    }
}

// gx[ic,il] += sum_{oc,k} gout[oc, il*s + k - p] * w[ic,oc,k]
inline void convt1d_bwd_input(const double* gout, int64_t cout, int64_t olen, const double* w, int64_t cin, int64_t k,
                              int64_t stride, int64_t pad, double* gx, int64_t len) {
    for (int64_t ic = 0; ic < cin; ++ic) {
        double* xrow = gx + ic * len;
        for (int64_t oc = 0; oc < cout; ++oc) {
            const double* grow = gout + oc * olen;
            const double* wrow = w + (ic * cout + oc) * k;
            for (int64_t kk = 0; kk < k; ++kk) {
                const double wv = wrow[kk];
                int64_t lo, hi;
                tap_bounds(kk, stride, pad, olen, len, lo, hi);
                const double* gs = grow + lo * stride + kk - pad;
                for (int64_t il = lo; il <= hi; ++il, gs += stride) xrow[il] += wv * *gs;
            }
        }
    }
}

// gw[ic,oc,k] += sum_il x[ic,il] * gout[oc, il*s + k - p]
inline void convt1d_bwd_weight(const double* gout, int64_t cout, int64_t olen, const double* x, int64_t cin,
                               int64_t len, int64_t k, int64_t stride, int64_t pad, double* gw) {
    for (int64_t ic = 0; ic < cin; ++ic) {
        const double* xrow = x + ic * len;
        for (int64_t oc = 0; oc < cout; ++oc) {
            const double* grow = gout + oc * olen;
            double* wrow = gw + (ic * cout + oc) * k;
            for (int64_t kk = 0; kk < k; ++kk) {
                int64_t lo, hi;
                tap_bounds(kk, stride, pad, olen, len, lo, hi);
                const double* gs = grow + lo * stride + kk - pad;
                double acc = 0.0;
                for (int64_t il = lo; il <= hi; ++il, gs += stride) acc += xrow[il] * *gs;
                wrow[kk] += acc;
            }
        }
    }
}

// 2-d variants; stride and padding apply to both spatial dims

inline void conv2d_fwd(const double* x, int64_t cin, int64_t h, int64_t w_, const double* w, int64_t cout, int64_t kh,
                       int64_t kw, int64_t stride, int64_t pad, double* out, int64_t oh, int64_t ow) {
    for (int64_t oc = 0; oc < cout; ++oc)
        for (int64_t ic = 0; ic < cin; ++ic) {
            const double* xpl = x + ic * h * w_;
            const double* wpl = w + ((oc * cin + ic) * kh) * kw;
            double* opl = out + oc * oh * ow;
            for (int64_t a = 0; a < kh; ++a) {
                int64_t rlo, rhi;
                tap_bounds(a, stride, pad, h, oh, rlo, rhi);
                for (int64_t b = 0; b < kw; ++b) {
                    const double wv = wpl[a * kw + b];
                    int64_t clo, chi;
                    tap_bounds(b, stride, pad, w_, ow, clo, chi);
                    for (int64_t r = rlo; r <= rhi; ++r) {
                        const double* xs = xpl + (r * stride + a - pad) * w_ + clo * stride + b - pad;
                        double* os = opl + r * ow;
                        for (int64_t c = clo; c <= chi; ++c, xs += stride) os[c] += wv * *xs;
                    }
                }
            }
        }
}

inline void conv2d_bwd_input(const double* gout, int64_t cout, int64_t oh, int64_t ow, const double* w, int64_t cin,
                             int64_t kh, int64_t kw, int64_t stride, int64_t pad, double* gx, int64_t h, int64_t w_) {
    for (int64_t oc = 0; oc < cout; ++oc)
        for (int64_t ic = 0; ic < cin; ++ic) {
            double* xpl = gx + ic * h * w_;
            const double* wpl = w + ((oc * cin + ic) * kh) * kw;
            const double* gpl = gout + oc * oh * ow;
            for (int64_t a = 0; a < kh; ++a) {
                int64_t rlo, rhi;
                tap_bounds(a, stride, pad, h, oh, rlo, rhi);
                for (int64_t b = 0; b < kw; ++b) {
                    const double wv = wpl[a * kw + b];
                    int64_t clo, chi;
                    tap_bounds(b, stride, pad, w_, ow, clo, chi);
                    for (int64_t r = rlo; r <= rhi; ++r) {
                        double* xs = xpl + (r * stride + a - pad) * w_ + clo * stride + b - pad;
                        const double* gs = gpl + r * ow;
                        for (int64_t c = clo; c <= chi; ++c, xs += stride) *xs += wv * gs[c];
                    }
                }
            }
        }
}

inline void conv2d_bwd_weight(const double* gout, int64_t cout, int64_t oh, int64_t ow, const double* x, int64_t cin,
                              int64_t h, int64_t w_, int64_t kh, int64_t kw, int64_t stride, int64_t pad, double* gw) {
    for (int64_t oc = 0; oc < cout; ++oc)
        for (int64_t ic = 0; ic < cin; ++ic) {
            const double* xpl = x + ic * h * w_;
            double* wpl = gw + ((oc * cin + ic) * kh) * kw;
            const double* gpl = gout + oc * oh * ow;
            for (int64_t a = 0; a < kh; ++a) {
                int64_t rlo, rhi;
                tap_bounds(a, stride, pad, h, oh, rlo, rhi);
                for (int64_t b = 0; b < kw; ++b) {
                    int64_t clo, chi;
                    tap_bounds(b, stride, pad, w_, ow, clo, chi);
                    double acc = 0.0;
                    for (int64_t r = rlo; r <= rhi; ++r) {
                        const double* xs = xpl + (r * stride + a - pad) * w_ + clo * stride + b - pad;
                        const double* gs = gpl + r * ow;
                        for (int64_t c = clo; c <= chi; ++c, xs += stride) acc += *xs * gs[c];
                    }
                    wpl[a * kw + b] += acc;
                }
            }
        }
}

inline void convt2d_fwd(const double* x, int64_t cin, int64_t h, int64_t w_, const double* w, int64_t cout, int64_t kh,
                        int64_t kw, int64_t stride, int64_t pad, double* out, int64_t oh, int64_t ow) {
    for (int64_t ic = 0; ic < cin; ++ic)
        for (int64_t oc = 0; oc < cout; ++oc) {
            const double* xpl = x + ic * h * w_;
            const double* wpl = w + ((ic * cout + oc) * kh) * kw;
            double* opl = out + oc * oh * ow;
            for (int64_t a = 0; a < kh; ++a) {
                int64_t rlo, rhi;
                tap_bounds(a, stride, pad, oh, h, rlo, rhi);
                for (int64_t b = 0; b < kw; ++b) {
                    const double wv = wpl[a * kw + b];
                    int64_t clo, chi;
                    tap_bounds(b, stride, pad, ow, w_, clo, chi);
                    for (int64_t r = rlo; r <= rhi; ++r) {
                        double* os = opl + (r * stride + a - pad) * ow + clo * stride + b - pad;
                        const double* xs = xpl + r * w_;
                        for (int64_t c = clo; c <= chi; ++c, os += stride) *os += wv * xs[c];
                    }
                }
            }
        }
}

inline void convt2d_bwd_input(const double* gout, int64_t cout, int64_t oh, int64_t ow, const double* w, int64_t cin,
                              int64_t kh, int64_t kw, int64_t stride, int64_t pad, double* gx, int64_t h, int64_t w_) {
    for (int64_t ic = 0; ic < cin; ++ic)
        for (int64_t oc = 0; oc < cout; ++oc) {
            double* xpl = gx + ic * h * w_;
            const double* wpl = w + ((ic * cout + oc) * kh) * kw;
            const double* gpl = gout + oc * oh * ow;
            for (int64_t a = 0; a < kh; ++a) {
                int64_t rlo, rhi;
                tap_bounds(a, stride, pad, oh, h, rlo, rhi);
                for (int64_t b = 0; b < kw; ++b) {
                    const double wv = wpl[a * kw + b];
                    int64_t clo, chi;
                    tap_bounds(b, stride, pad, ow, w_, clo, chi);
                    for (int64_t r = rlo; r <= rhi; ++r) {
                        const double* gs = gpl + (r * stride + a - pad) * ow + clo * stride + b - pad;
                        double* xs = xpl + r * w_;
                        for (int64_t c = clo; c <= chi; ++c, gs += stride) xs[c] += wv * *gs;
                    }
                }
            }
        }
}

inline void convt2d_bwd_weight(const double* gout, int64_t cout, int64_t oh, int64_t ow, const double* x, int64_t cin,
                               int64_t h, int64_t w_, int64_t kh, int64_t kw, int64_t stride, int64_t pad,
                               double* gw) {
    for (int64_t ic = 0; ic < cin; ++ic)
        for (int64_t oc = 0; oc < cout; ++oc) {
            const double* xpl = x + ic * h * w_;
            double* wpl = gw + ((ic * cout + oc) * kh) * kw;
            const double* gpl = gout + oc * oh * ow;
            for (int64_t a = 0; a < kh; ++a) {
                int64_t rlo, rhi;
                tap_bounds(a, stride, pad, oh, h, rlo, rhi);
                for (int64_t b = 0; b < kw; ++b) {
                    int64_t clo, chi;
                    tap_bounds(b, stride, pad, ow, w_, clo, chi);
                    double acc = 0.0;
                    for (int64_t r = rlo; r <= rhi; ++r) {
                        const double* gs = gpl + (r * stride + a - pad) * ow + clo * stride + b - pad;
                        const double* xs = xpl + r * w_;
                        for (int64_t c = clo; c <= chi; ++c, gs += stride) acc += xs[c] * *gs;
                    }
                    wpl[a * kw + b] += acc;
                }
            }
        }
}

}  // namespace npprov::convdetail
