#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "npprov/graph.hpp"
#include "npprov/rng.hpp"

using namespace npprov;

namespace {

Tensor random_tensor(Shape s, CounterRng& rng, double lo = -2.0, double hi = 2.0) {
    Tensor t(std::move(s));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) acc += a[i] * b[i];
    return acc;
}

}  // namespace

TEST_CASE("forward values match hand oracles") {
    Graph g;
    SECTION("conv1d with an identity kernel") {
        Value x = g.constant(Tensor({1, 3}, {1, 2, 3}));
        Value w = g.constant(Tensor({1, 1, 1}, {1}));
        Value y = g.conv1d(x, w, 1, 0);
        CHECK(g.value(y).data == std::vector<double>{1, 2, 3});
    }
    SECTION("softplus at zero is log 2") {
        Value y = g.softplus(g.constant(Tensor::scalar(0.0)));
        CHECK(g.value(y)[0] == Catch::Approx(0.6931471805599453).epsilon(1e-12));
    }
    SECTION("matmul hand arithmetic") {
        Value a = g.constant(Tensor({2, 2}, {1, 2, 3, 4}));
        Value b = g.constant(Tensor({2, 1}, {5, 6}));
        Value c = g.matmul(a, b);
        CHECK(g.value(c).shape == Shape{2, 1});
        CHECK(g.value(c).data == std::vector<double>{17, 39});
    }
}

TEST_CASE("backward computes exact analytic gradients") {
    SECTION("sum of squares") {
        Graph g;
        Value theta = g.param(Tensor({2}, {1, 2}));
        Value loss = g.sum_all(g.mul(theta, theta));
        g.backward(loss);
        CHECK(g.grad_of(theta).data == std::vector<double>{2, 4});
    }
    SECTION("plain sum gives all-ones") {
        Graph g;
        Value theta = g.param(Tensor({2, 3}));
        g.backward(g.sum_all(theta));
        CHECK(g.grad_of(theta).data == std::vector<double>(6, 1.0));
    }
    SECTION("unreached parameters get zero gradient") {
        Graph g;
        Value theta = g.param(Tensor({3}, {1, 2, 3}));
        Value other = g.param(Tensor({2}, {5, 6}));
        g.backward(g.sum_all(other));
        CHECK(g.grad_of(theta).data == std::vector<double>(3, 0.0));
    }
    SECTION("shared subexpression accumulates") {
        Graph g;
        Value x = g.param(Tensor::scalar(3.0));
        Value loss = g.sum_all(g.add(g.mul(x, x), x));  // x^2 + x
        g.backward(loss);
        CHECK(g.grad_of(x)[0] == Catch::Approx(7.0).epsilon(1e-14));
    }
    SECTION("non-scalar loss is rejected") {
        Graph g;
        Value x = g.param(Tensor({2}, {1, 2}));
        CHECK_THROWS_AS(g.backward(x), ContractViolation);
    }
}

TEST_CASE("grad_check matches its stated examples") {
    auto square = [](Graph& g, Value p) { return g.sum_all(g.mul(p, p)); };
    CHECK(grad_check(square, Tensor::scalar(3.0), 1e-5) < 1e-8);
    auto sp = [](Graph& g, Value p) { return g.sum_all(g.softplus(p)); };
    CHECK(grad_check(sp, Tensor::scalar(0.0), 1e-5) < 1e-7);
    auto constant = [](Graph& g, Value) { return g.constant(Tensor::scalar(4.0)); };
    Graph tmp;
    CHECK(grad_check(constant, Tensor::scalar(1.0), 1e-5) == 0.0);
    CHECK_THROWS_AS(grad_check(square, Tensor::scalar(1.0), 1e-2), ContractViolation);
}

TEST_CASE("every primitive passes gradient checks at random points") {
    CounterRng rng(2024, 0, 0);
    const double tol = 1e-6;

    for (int rep = 0; rep < 10; ++rep) {
        SECTION("elementwise and reductions, repetition " + std::to_string(rep)) {
            const Tensor pt = random_tensor({2, 3}, rng);
            const Tensor other = random_tensor({2, 3}, rng);
            const Tensor col = random_tensor({2, 1}, rng);

            auto with_const = [&](auto op) {
                return [op, other](Graph& g, Value p) { return g.sum_all(op(g, p, g.constant(other))); };
            };
            CHECK(grad_check(with_const([](Graph& g, Value a, Value b) { return g.add(a, b); }), pt, 1e-5) < tol);
            CHECK(grad_check(with_const([](Graph& g, Value a, Value b) { return g.sub(a, b); }), pt, 1e-5) < tol);
            CHECK(grad_check(with_const([](Graph& g, Value a, Value b) { return g.mul(a, b); }), pt, 1e-5) < tol);
            // keep denominators away from zero: |x|+1
            CHECK(grad_check([other](Graph& g, Value p) {
                      Value den = g.add(g.mul(p, p), g.constant(Tensor::ones({2, 3})));
                      return g.sum_all(g.div(g.constant(other), den));
                  }, pt, 1e-5) < tol);
            // broadcasting operand
            CHECK(grad_check([col](Graph& g, Value p) { return g.sum_all(g.mul(p, g.constant(col))); }, pt, 1e-5) <
                  tol);
            CHECK(grad_check([](Graph& g, Value p) { return g.sum_all(g.neg(p)); }, pt, 1e-5) < tol);
            CHECK(grad_check([](Graph& g, Value p) { return g.sum_all(g.exp(p)); }, pt, 1e-5) < tol);
            // log over strictly positive arguments
            CHECK(grad_check([](Graph& g, Value p) {
                      return g.sum_all(g.log(g.add(g.mul(p, p), g.constant(Tensor::ones({2, 3})))));
                  }, pt, 1e-5) < tol);
            CHECK(grad_check([](Graph& g, Value p) { return g.sum_all(g.softplus(p)); }, pt, 1e-5) < tol);
            CHECK(grad_check([](Graph& g, Value p) { return g.sum_all(g.sigmoid(p)); }, pt, 1e-5) < tol);
            CHECK(grad_check([](Graph& g, Value p) { return g.sum_all(g.mul(g.sum(p, 0), g.sum(p, 0))); }, pt, 1e-5) <
                  tol);
            CHECK(grad_check([](Graph& g, Value p) { return g.sum_all(g.mul(g.mean(p, 1), g.mean(p, 1))); }, pt,
                             1e-5) < tol);
            CHECK(grad_check([](Graph& g, Value p) { return g.mul(g.mean_all(p), g.mean_all(p)); }, pt, 1e-5) < tol);
            CHECK(grad_check([other](Graph& g, Value p) {
                      return g.sum_all(g.mul(g.concat({p, g.constant(other)}, 1), g.concat({g.constant(other), p}, 1)));
                  }, pt, 1e-5) < tol);
            CHECK(grad_check([](Graph& g, Value p) { return g.sum_all(g.mul(g.reshape(p, {3, 2}), g.reshape(p, {3, 2}))); },
                             pt, 1e-5) < tol);
            CHECK(grad_check([](Graph& g, Value p) { return g.sum_all(g.slice(p, 1, 1, 2)); }, pt, 1e-5) < tol);
            CHECK(grad_check([](Graph& g, Value p) {
                      Value padded = g.pad_axis(p, 0, 1, 2);
                      return g.sum_all(g.mul(padded, padded));
                  }, pt, 1e-5) < tol);
            CHECK(grad_check([col](Graph& g, Value p) {
                      (void)col;
                      Value e = g.expand(g.reshape(g.sum(p, 1), {2, 1}), {2, 5});
                      return g.sum_all(g.mul(e, e));
                  }, pt, 1e-5) < tol);
        }

        SECTION("relu away from the kink, repetition " + std::to_string(rep)) {
            Tensor pt = random_tensor({2, 3}, rng);
            for (auto& v : pt.data)
                if (std::abs(v) < 0.05) v += 0.1;
            CHECK(grad_check([](Graph& g, Value p) { return g.sum_all(g.relu(p)); }, pt, 1e-5) < tol);
        }

        SECTION("linear maps, repetition " + std::to_string(rep)) {
            const Tensor a = random_tensor({3, 4}, rng);
            const Tensor b = random_tensor({4, 2}, rng);
            CHECK(grad_check([b](Graph& g, Value p) {
                      Value mm = g.matmul(p, g.constant(b));
                      return g.sum_all(g.mul(mm, mm));
                  }, a, 1e-5) < tol);
            CHECK(grad_check([a](Graph& g, Value p) {
                      Value mm = g.matmul(g.constant(a), p);
                      return g.sum_all(g.mul(mm, mm));
                  }, b, 1e-5) < tol);

            const Tensor x = random_tensor({3, 5}, rng);
            const Tensor w = random_tensor({2, 3}, rng);
            const Tensor bias = random_tensor({2}, rng);
            auto quad = [](Graph& g, Value v) { return g.sum_all(g.mul(v, v)); };
            CHECK(grad_check([w, bias, quad](Graph& g, Value p) {
                      return quad(g, g.affine_pointwise(p, g.constant(w), g.constant(bias)));
                  }, x, 1e-5) < tol);
            CHECK(grad_check([x, bias, quad](Graph& g, Value p) {
                      return quad(g, g.affine_pointwise(g.constant(x), p, g.constant(bias)));
                  }, w, 1e-5) < tol);
            CHECK(grad_check([x, w, quad](Graph& g, Value p) {
                      return quad(g, g.affine_pointwise(g.constant(x), g.constant(w), p));
                  }, bias, 1e-5) < tol);
        }

        SECTION("convolutions, repetition " + std::to_string(rep)) {
            auto quad = [](Graph& g, Value v) { return g.sum_all(g.mul(v, v)); };
            const Tensor x1 = random_tensor({2, 8}, rng);
            const Tensor w1 = random_tensor({3, 2, 3}, rng);
            CHECK(grad_check([w1, quad](Graph& g, Value p) { return quad(g, g.conv1d(p, g.constant(w1), 2, 1)); }, x1,
                             1e-5) < 1e-6);
            CHECK(grad_check([x1, quad](Graph& g, Value p) { return quad(g, g.conv1d(g.constant(x1), p, 2, 1)); }, w1,
                             1e-5) < 1e-6);

            const Tensor xt = random_tensor({3, 4}, rng);
            const Tensor wt = random_tensor({3, 2, 3}, rng);
            CHECK(grad_check([wt, quad](Graph& g, Value p) {
                      return quad(g, g.conv_transpose1d(p, g.constant(wt), 2, 1, 1));
                  }, xt, 1e-5) < 1e-6);
            CHECK(grad_check([xt, quad](Graph& g, Value p) {
                      return quad(g, g.conv_transpose1d(g.constant(xt), p, 2, 1, 1));
                  }, wt, 1e-5) < 1e-6);

            const Tensor x2 = random_tensor({2, 6, 6}, rng);
            const Tensor w2 = random_tensor({3, 2, 3, 3}, rng);
            CHECK(grad_check([w2, quad](Graph& g, Value p) { return quad(g, g.conv2d(p, g.constant(w2), 2, 1)); }, x2,
                             1e-5) < 1e-6);
            CHECK(grad_check([x2, quad](Graph& g, Value p) { return quad(g, g.conv2d(g.constant(x2), p, 2, 1)); }, w2,
                             1e-5) < 1e-6);

            const Tensor xt2 = random_tensor({3, 3, 3}, rng);
            const Tensor wt2 = random_tensor({3, 2, 3, 3}, rng);
            CHECK(grad_check([wt2, quad](Graph& g, Value p) {
                      return quad(g, g.conv_transpose2d(p, g.constant(wt2), 2, 1, 1));
                  }, xt2, 1e-5) < 1e-6);
            CHECK(grad_check([xt2, quad](Graph& g, Value p) {
                      return quad(g, g.conv_transpose2d(g.constant(xt2), p, 2, 1, 1));
                  }, wt2, 1e-5) < 1e-6);
        }
    }
}

TEST_CASE("conv_transpose1d is the adjoint of conv1d") {
    CounterRng rng(7, 0, 0);
    for (int rep = 0; rep < 20; ++rep) {
        const Tensor u = random_tensor({2, 10}, rng);
        const Tensor w = random_tensor({3, 2, 4}, rng);
        Graph g;
        Value cu = g.conv1d(g.constant(u), g.constant(w), 2, 1);  // [3, 5]
        const Tensor v = random_tensor({3, 5}, rng);
        Graph h;
        Value tv = h.conv_transpose1d(h.constant(v), h.constant(w), 2, 1, 0);  // back to [2, 10]
        REQUIRE(h.value(tv).shape == Shape{2, 10});
        CHECK(dot(g.value(cu), v) == Catch::Approx(dot(u, h.value(tv))).margin(1e-10));
    }
}

TEST_CASE("conv_transpose2d is the adjoint of conv2d") {
    CounterRng rng(8, 0, 0);
    for (int rep = 0; rep < 10; ++rep) {
        const Tensor u = random_tensor({2, 6, 6}, rng);
        const Tensor w = random_tensor({3, 2, 3, 3}, rng);
        Graph g;
        Value cu = g.conv2d(g.constant(u), g.constant(w), 2, 1);  // [3, 3, 3]
        const Tensor v = random_tensor({3, 3, 3}, rng);
        Graph h;
        Value tv = h.conv_transpose2d(h.constant(v), h.constant(w), 2, 1, 1);  // [2, 6, 6]
        REQUIRE(h.value(tv).shape == Shape{2, 6, 6});
        CHECK(dot(g.value(cu), v) == Catch::Approx(dot(u, h.value(tv))).margin(1e-10));
    }
}

TEST_CASE("broadcast adjoints reduce to the input shape") {
    Graph g;
    Value a = g.param(Tensor({3, 1}, {1, 2, 3}));
    Value b = g.param(Tensor({1, 4}, {1, 1, 2, 2}));
    Value loss = g.sum_all(g.mul(a, b));
    g.backward(loss);
    CHECK(g.grad_of(a).shape == Shape{3, 1});
    CHECK(g.grad_of(b).shape == Shape{1, 4});
    CHECK(g.grad_of(a).data == std::vector<double>{6, 6, 6});
    CHECK(g.grad_of(b).data == std::vector<double>{6, 6, 6, 6});
}

TEST_CASE("forward evaluation is bit-deterministic") {
    CounterRng rng(77, 0, 0);
    const Tensor x = random_tensor({3, 12}, rng);
    const Tensor w = random_tensor({4, 3, 5}, rng);
    auto run = [&] {
        Graph g;
        Value y = g.softplus(g.conv1d(g.constant(x), g.constant(w), 2, 2));
        return g.value(g.sum_all(y))[0];
    };
    const double first = run();
    for (int i = 0; i < 5; ++i) CHECK(run() == first);
}

TEST_CASE("numeric faults surface as errors") {
    Graph g;
    CHECK_THROWS_AS(g.exp(g.constant(Tensor::scalar(1000.0))), NumericFault);
    CHECK_THROWS_AS(g.div(g.constant(Tensor::scalar(1.0)), g.constant(Tensor::scalar(0.0))), NumericFault);
    CHECK_THROWS_AS(g.log(g.constant(Tensor::scalar(-1.0))), NumericFault);
}

TEST_CASE("shape mismatches name both shapes") {
    Graph g;
    Value a = g.constant(Tensor({2, 3}));
    Value b = g.constant(Tensor({2, 2}));
    try {
        g.matmul(a, b);
        FAIL("expected ContractViolation");
    } catch (const ContractViolation& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[2,2]") != std::string::npos);
    }
    CHECK_THROWS_AS(g.add(g.constant(Tensor({3})), g.constant(Tensor({4}))), ContractViolation);
    CHECK_THROWS_AS(g.conv1d(g.constant(Tensor({1, 2})), g.constant(Tensor({1, 1, 5})), 1, 0), ContractViolation);
}
