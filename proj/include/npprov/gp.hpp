#pragma once

#include <cmath>
#include <vector>

#include "npprov/errors.hpp"
#include "npprov/kernels.hpp"
#include "npprov/rng.hpp"
#include "npprov/tensor.hpp"

namespace npprov {

inline constexpr double kJitter = 1e-8;

struct GaussianPrediction {
    Tensor mean;  // [M]
    Tensor std;   // [M], strictly positive
};

namespace gpdetail {

// in-place lower Cholesky of a dense SPD matrix; false on failure
inline bool cholesky(std::vector<double>& a, int64_t n) {
    for (int64_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (int64_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (!(d > 0.0)) return false;
        const double l = std::sqrt(d);
        a[j * n + j] = l;
        for (int64_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (int64_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / l;
        }
    }
    // zero strict upper triangle so callers can treat the buffer as L
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = i + 1; j < n; ++j) a[i * n + j] = 0.0;
    return true;
}

// solve L y = b in place
inline void solve_lower(const std::vector<double>& l, int64_t n, std::vector<double>& b) {
    for (int64_t i = 0; i < n; ++i) {
        double s = b[i];
        for (int64_t k = 0; k < i; ++k) s -= l[i * n + k] * b[k];
        b[i] = s / l[i * n + i];
    }
}

// solve L^T y = b in place
inline void solve_upper_t(const std::vector<double>& l, int64_t n, std::vector<double>& b) {
    for (int64_t i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int64_t k = i + 1; k < n; ++k) s -= l[k * n + i] * b[k];
        b[i] = s / l[i * n + i];
    }
}

// Cholesky of gram + jitter*I, escalating jitter 1e-8 -> 1e-7 -> 1e-6
inline std::vector<double> chol_with_jitter(KernelSpec spec, const Tensor& x) {
    const int64_t n = x.numel();
    const Tensor k = gram(spec, x, x);
    for (double jitter : {1e-8, 1e-7, 1e-6}) {
        std::vector<double> a = k.data;
        for (int64_t i = 0; i < n; ++i) a[i * n + i] += jitter;
        if (cholesky(a, n)) return a;
    }
    throw DegenerateInput("covariance of " + std::to_string(n) + " points is not positive definite at jitter 1e-6");
}

}  // namespace gpdetail

// One draw from the zero-mean prior at positions x, deterministic in seed.
inline Tensor gp_sample(KernelSpec spec, const Tensor& x, uint64_t seed) {
    if (x.rank() != 1 || x.numel() < 1) throw ContractViolation("gp_sample: x must be a nonempty 1-D tensor");
    const int64_t n = x.numel();
    const std::vector<double> l = gpdetail::chol_with_jitter(spec, x);
    CounterRng rng(seed, 0, rng_stream::kGpSample);
    std::vector<double> z(static_cast<size_t>(n));
    for (auto& v : z) v = rng.normal();
    Tensor y({n});
    for (int64_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int64_t k = 0; k <= i; ++k) s += l[i * n + k] * z[static_cast<size_t>(k)];
        y[i] = s;
    }
    return y;
}

// Exact posterior at xt given noiseless observations (xc, yc). N = 0 yields
// the prior. Only the diagonal of the predictive covariance is reported.
inline GaussianPrediction gp_posterior(KernelSpec spec, const Tensor& xc, const Tensor& yc, const Tensor& xt) {
    if (xt.rank() != 1 || xt.numel() < 1) throw ContractViolation("gp_posterior: xt must be a nonempty 1-D tensor");
    if (xc.numel() != yc.numel())
        throw ContractViolation("gp_posterior: context shapes differ, " + shape_str(xc.shape) + " vs " +
                                shape_str(yc.shape));
    const int64_t n = xc.numel(), m = xt.numel();
    GaussianPrediction out{Tensor({m}), Tensor({m})};
    if (n == 0) {
        for (int64_t j = 0; j < m; ++j) {
            out.mean[j] = 0.0;
            out.std[j] = std::sqrt(kernel_eval(spec, xt[j], xt[j]) + kJitter);
        }
        return out;
    }
    const std::vector<double> l = gpdetail::chol_with_jitter(spec, xc);
    std::vector<double> alpha = yc.data;
    gpdetail::solve_lower(l, n, alpha);
    gpdetail::solve_upper_t(l, n, alpha);
    const Tensor kstar = gram(spec, xc, xt);  // [N, M]
    std::vector<double> col(static_cast<size_t>(n));
    for (int64_t j = 0; j < m; ++j) {
        double mu = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            col[static_cast<size_t>(i)] = kstar[i * m + j];
            mu += kstar[i * m + j] * alpha[static_cast<size_t>(i)];
        }
        gpdetail::solve_lower(l, n, col);
        double reduction = 0.0;
        for (double v : col) reduction += v * v;
        const double var = kernel_eval(spec, xt[j], xt[j]) - reduction;
        out.mean[j] = mu;
        out.std[j] = std::sqrt(std::max(var, 0.0) + kJitter);
    }
    return out;
}

// Per-point average log density of y under independent Gaussians.
inline double gaussian_loglik(const Tensor& y, const GaussianPrediction& pred) {
    if (!y.same_shape(pred.mean) || !y.same_shape(pred.std))
        throw ContractViolation("gaussian_loglik: shape mismatch " + shape_str(y.shape) + " vs " +
                                shape_str(pred.mean.shape));
    constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5*log(2*pi)
    double acc = 0.0;
    for (int64_t i = 0; i < y.numel(); ++i) {
        const double sigma = pred.std[i];
        if (!(sigma > 0.0)) throw ContractViolation("gaussian_loglik: non-positive std");
        const double z = (y[i] - pred.mean[i]) / sigma;
        acc += -kHalfLog2Pi - std::log(sigma) - 0.5 * z * z;
    }
    return acc / static_cast<double>(y.numel());
}

}  // namespace npprov
