#pragma once

#include <cmath>
#include <string>

#include "npprov/errors.hpp"
#include "npprov/tensor.hpp"

namespace npprov {

// The three stationary covariance functions used by the synthetic task
// generators. All hyperparameters are fixed constants.
enum class KernelKind { EQ, Matern52, WeaklyPeriodic };

struct KernelSpec {
    KernelKind kind = KernelKind::EQ;
};

inline KernelSpec kernel_from_name(const std::string& name) {
    if (name == "eq") return {KernelKind::EQ};
    if (name == "matern") return {KernelKind::Matern52};
    if (name == "weakly-periodic") return {KernelKind::WeaklyPeriodic};
    throw ContractViolation("unknown kernel name '" + name + "'");
}

inline const char* kernel_name(KernelSpec spec) {
    switch (spec.kind) {
        case KernelKind::EQ: return "eq";
        case KernelKind::Matern52: return "matern";
        default: return "weakly-periodic";
    }
}

inline double kernel_eval(KernelSpec spec, double x, double xp) {
    switch (spec.kind) {
        case KernelKind::EQ: {
            const double r = (x - xp) / 0.25;
            return std::exp(-0.5 * r * r);
        }
        case KernelKind::Matern52: {
            // Matern 5/2 correlation on the scaled distance d = 4|x - x'|
            const double d = 4.0 * std::abs(x - xp);
            const double s5d = std::sqrt(5.0) * d;
            return (1.0 + s5d + (5.0 / 3.0) * d * d) * std::exp(-s5d);
        }
        default: {
            const double c = std::cos(8.0 * M_PI * x) - std::cos(8.0 * M_PI * xp);
            const double s = std::sin(8.0 * M_PI * x) - std::sin(8.0 * M_PI * xp);
            const double dx = x - xp;
            return std::exp(-0.5 * c * c - 0.5 * s * s) * std::exp(-dx * dx / 8.0);
        }
    }
}

inline Tensor gram(KernelSpec spec, const Tensor& x, const Tensor& xp) {
    if (x.rank() != 1 || xp.rank() != 1)
        throw ContractViolation("gram: inputs must be 1-D, got " + shape_str(x.shape) + " and " +
                                shape_str(xp.shape));
    const int64_t n = x.numel(), m = xp.numel();
    Tensor k({n, m});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j) k[i * m + j] = kernel_eval(spec, x[i], xp[j]);
    return k;
}

}  // namespace npprov
