#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "npprov/gp.hpp"
#include "npprov/kernels.hpp"
#include "npprov/rng.hpp"

using namespace npprov;

namespace {

// Independent oracle: full dense inverse via Gauss-Jordan, no Cholesky.
std::vector<double> gauss_jordan_inverse(std::vector<double> a, int64_t n) {
    std::vector<double> inv(static_cast<size_t>(n * n), 0.0);
    for (int64_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
    for (int64_t col = 0; col < n; ++col) {
        int64_t pivot = col;
        for (int64_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        for (int64_t c = 0; c < n; ++c) {
            std::swap(a[pivot * n + c], a[col * n + c]);
            std::swap(inv[pivot * n + c], inv[col * n + c]);
        }
        const double p = a[col * n + col];
        REQUIRE(p != 0.0);
        for (int64_t c = 0; c < n; ++c) {
            a[col * n + c] /= p;
            inv[col * n + c] /= p;
        }
        for (int64_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r * n + col];
            for (int64_t c = 0; c < n; ++c) {
                a[r * n + c] -= f * a[col * n + c];
                inv[r * n + c] -= f * inv[col * n + c];
            }
        }
    }
    return inv;
}

GaussianPrediction brute_force_posterior(KernelSpec spec, const Tensor& xc, const Tensor& yc, const Tensor& xt) {
    const int64_t n = xc.numel(), m = xt.numel();
    Tensor k = gram(spec, xc, xc);
    for (int64_t i = 0; i < n; ++i) k[i * n + i] += kJitter;
    const auto kinv = gauss_jordan_inverse(k.data, n);
    const Tensor ks = gram(spec, xc, xt);
    GaussianPrediction out{Tensor({m}), Tensor({m})};
    for (int64_t j = 0; j < m; ++j) {
        double mu = 0.0, red = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            double kiy = 0.0, kik = 0.0;
            for (int64_t l = 0; l < n; ++l) {
                kiy += kinv[i * n + l] * yc[l];
                kik += kinv[i * n + l] * ks[l * m + j];
            }
            mu += ks[i * m + j] * kiy;
            red += ks[i * m + j] * kik;
        }
        out.mean[j] = mu;
        out.std[j] = std::sqrt(std::max(kernel_eval(spec, xt[j], xt[j]) - red, 0.0) + kJitter);
    }
    return out;
}

const KernelSpec kAll[] = {{KernelKind::EQ}, {KernelKind::Matern52}, {KernelKind::WeaklyPeriodic}};

}  // namespace

TEST_CASE("kernel closed forms") {
    const KernelSpec eq{KernelKind::EQ};
    CHECK(kernel_eval(eq, 1.3, 1.3) == 1.0);
    CHECK(kernel_eval(eq, 0.25, 0.0) == Catch::Approx(0.6065306597126334).epsilon(1e-12));
    CHECK(kernel_eval({KernelKind::Matern52}, 0.7, 0.7) == 1.0);
    CHECK(kernel_eval({KernelKind::WeaklyPeriodic}, -0.4, -0.4) == 1.0);
}

TEST_CASE("kernels are symmetric and bounded by one") {
    CounterRng rng(5, 0, 0);
    for (const KernelSpec spec : kAll) {
        for (int i = 0; i < 200; ++i) {
            const double a = rng.uniform(-5, 5), b = rng.uniform(-5, 5);
            const double k1 = kernel_eval(spec, a, b), k2 = kernel_eval(spec, b, a);
            CHECK(k1 == Catch::Approx(k2).margin(1e-15));
            CHECK(k1 > 0.0);
            CHECK(k1 <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("gram matches closed forms") {
    const KernelSpec eq{KernelKind::EQ};
    Tensor one = gram(eq, Tensor::from({0.0}), Tensor::from({0.0}));
    CHECK(one.shape == Shape{1, 1});
    CHECK(one[0] == 1.0);

    Tensor k = gram(eq, Tensor::from({0.0, 1.0}), Tensor::from({0.0, 1.0}));
    CHECK(k.at({0, 0}) == 1.0);
    CHECK(k.at({1, 1}) == 1.0);
    CHECK(k.at({0, 1}) == Catch::Approx(std::exp(-8.0)).epsilon(1e-12));
    CHECK(k.at({0, 1}) == k.at({1, 0}));

    Tensor row = gram(eq, Tensor::from({0.0}), Tensor::from({0.0, 0.25}));
    CHECK(row.shape == Shape{1, 2});
    CHECK(row[0] == 1.0);
    CHECK(row[1] == Catch::Approx(0.6065306597126334).epsilon(1e-12));
}

TEST_CASE("gp_sample is deterministic in its seed") {
    const Tensor x = Tensor::from({-1.0, 0.0, 0.5, 2.0});
    for (const KernelSpec spec : kAll) {
        const Tensor a = gp_sample(spec, x, 123);
        const Tensor b = gp_sample(spec, x, 123);
        CHECK(a.data == b.data);
        const Tensor c = gp_sample(spec, x, 124);
        CHECK(a.data != c.data);
    }
}

TEST_CASE("single-point samples have unit variance") {
    const Tensor x = Tensor::from({0.3});
    double s = 0.0, s2 = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const double v = gp_sample({KernelKind::EQ}, x, static_cast<uint64_t>(i))[0];
        s += v;
        s2 += v * v;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("empirical covariance of samples matches the gram matrix") {
    const Tensor x = Tensor::from({-1.0, -0.4, 0.1, 0.8, 1.7});
    const int64_t n = x.numel();
    const int reps = 2000;
    for (const KernelSpec spec : kAll) {
        std::vector<double> cov(static_cast<size_t>(n * n), 0.0);
        for (int r = 0; r < reps; ++r) {
            const Tensor y = gp_sample(spec, x, static_cast<uint64_t>(r) + 50000);
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = 0; j < n; ++j) cov[i * n + j] += y[i] * y[j] / reps;
        }
        const Tensor k = gram(spec, x, x);
        for (int64_t i = 0; i < n * n; ++i) CHECK(std::abs(cov[static_cast<size_t>(i)] - k[i]) < 0.1);
    }
}

TEST_CASE("posterior with no context is the prior") {
    const GaussianPrediction p = gp_posterior({KernelKind::EQ}, Tensor{}, Tensor{}, Tensor::from({-3.0, 0.0, 4.0}));
    for (int64_t j = 0; j < 3; ++j) {
        CHECK(p.mean[j] == 0.0);
        CHECK(p.std[j] == Catch::Approx(1.0).margin(1e-7));
    }
}

TEST_CASE("posterior interpolates context points") {
    const Tensor xc = Tensor::from({-0.5, 0.2, 1.1});
    const Tensor yc = Tensor::from({0.3, -1.2, 0.7});
    for (const KernelSpec spec : kAll) {
        const GaussianPrediction p = gp_posterior(spec, xc, yc, xc);
        for (int64_t j = 0; j < 3; ++j) {
            CHECK(p.mean[j] == Catch::Approx(yc[j]).margin(1e-4));
            CHECK(p.std[j] < 1e-3);
        }
    }
}

TEST_CASE("posterior matches a hand dense solve on two points") {
    // Xc=[0,1], Yc=[1,-1], Xt=[0.5]: solve the regularized 2x2 system directly
    const double k01 = std::exp(-8.0);
    const double ks = std::exp(-0.5 * (0.5 / 0.25) * (0.5 / 0.25));  // k(0.5, 0) = k(0.5, 1)
    const double a = 1.0 + kJitter;
    const double det = a * a - k01 * k01;
    // K^{-1} y with y = [1, -1]
    const double w0 = (a * 1.0 - k01 * -1.0) / det;
    const double w1 = (-k01 * 1.0 + a * -1.0) / det;
    const double mu = ks * (w0 + w1);
    const double red = (ks * ks * (a - k01) * 2.0) / det;  // kstar^T K^{-1} kstar
    const double sd = std::sqrt(std::max(1.0 - red, 0.0) + kJitter);

    const GaussianPrediction p =
        gp_posterior({KernelKind::EQ}, Tensor::from({0.0, 1.0}), Tensor::from({1.0, -1.0}), Tensor::from({0.5}));
    CHECK(p.mean[0] == Catch::Approx(mu).epsilon(1e-10));
    CHECK(p.std[0] == Catch::Approx(sd).epsilon(1e-10));
}

TEST_CASE("posterior agrees with the brute-force dense inverse") {
    CounterRng rng(99, 0, 0);
    for (int rep = 0; rep < 60; ++rep) {
        const KernelSpec spec = kAll[rep % 3];
        const int64_t n = rng.uniform_int(1, 10), m = rng.uniform_int(1, 8);
        Tensor xc({n}), xt({m});
        for (auto& v : xc.data) v = rng.uniform(-2, 2);
        for (auto& v : xt.data) v = rng.uniform(-2, 2);
        const Tensor yc = gp_sample(spec, xc, static_cast<uint64_t>(rep));
        const GaussianPrediction fast = gp_posterior(spec, xc, yc, xt);
        const GaussianPrediction slow = brute_force_posterior(spec, xc, yc, xt);
        for (int64_t j = 0; j < m; ++j) {
            CHECK(fast.mean[j] == Catch::Approx(slow.mean[j]).epsilon(1e-8).margin(1e-8));
            CHECK(fast.std[j] == Catch::Approx(slow.std[j]).epsilon(1e-8).margin(1e-8));
        }
    }
}

TEST_CASE("posterior std ignores the context values") {
    CounterRng rng(13, 0, 0);
    for (const KernelSpec spec : kAll) {
        Tensor xc({6}), xt({5});
        for (auto& v : xc.data) v = rng.uniform(-2, 2);
        for (auto& v : xt.data) v = rng.uniform(-2, 2);
        const Tensor yc = gp_sample(spec, xc, 1);
        Tensor scaled = yc;
        for (auto& v : scaled.data) v *= -17.5;
        const GaussianPrediction a = gp_posterior(spec, xc, yc, xt);
        const GaussianPrediction b = gp_posterior(spec, xc, scaled, xt);
        for (int64_t j = 0; j < 5; ++j) CHECK(std::abs(a.std[j] - b.std[j]) < 1e-12);
    }
}

TEST_CASE("posterior std never exceeds the prior") {
    CounterRng rng(14, 0, 0);
    for (const KernelSpec spec : kAll) {
        Tensor xc({8}), xt({20});
        for (auto& v : xc.data) v = rng.uniform(-2, 2);
        for (auto& v : xt.data) v = rng.uniform(-5, 5);
        const Tensor yc = gp_sample(spec, xc, 2);
        const GaussianPrediction p = gp_posterior(spec, xc, yc, xt);
        for (int64_t j = 0; j < 20; ++j) CHECK(p.std[j] <= 1.0 + 1e-6);
    }
}

TEST_CASE("gaussian_loglik closed forms") {
    auto ll = [](double y, double mu, double sigma) {
        return gaussian_loglik(Tensor::from({y}), {Tensor::from({mu}), Tensor::from({sigma})});
    };
    CHECK(ll(0.7, 0.7, 1.0) == Catch::Approx(-0.9189385332046727).epsilon(1e-12));
    CHECK(ll(1.7, 0.7, 1.0) == Catch::Approx(-1.4189385332046727).epsilon(1e-12));
    CHECK(ll(0.7, 0.7, 0.5) == Catch::Approx(-0.2257913526447274).epsilon(1e-12));
    CHECK_THROWS_AS(ll(0.0, 0.0, 0.0), ContractViolation);
    CHECK_THROWS_AS(ll(0.0, 0.0, -1.0), ContractViolation);
}

TEST_CASE("gaussian_loglik averages per point") {
    const Tensor y = Tensor::from({1.0, 2.0});
    const GaussianPrediction p{Tensor::from({1.0, 2.0}), Tensor::from({1.0, 1.0})};
    CHECK(gaussian_loglik(y, p) == Catch::Approx(-0.9189385332046727).epsilon(1e-12));
}

TEST_CASE("gaussian_loglik is maximized at sigma equal to the residual") {
    const double resid = 0.37;
    const Tensor y = Tensor::from({resid});
    const Tensor mu = Tensor::from({0.0});
    const double best = gaussian_loglik(y, {mu, Tensor::from({resid})});
    for (double sigma = 0.05; sigma < 2.0; sigma += 0.01) {
        if (std::abs(sigma - resid) < 5e-3) continue;
        CHECK(gaussian_loglik(y, {mu, Tensor::from({sigma})}) < best);
    }
}
