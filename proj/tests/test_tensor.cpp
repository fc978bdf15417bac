#include <catch2/catch_amalgamated.hpp>

#include "npprov/rng.hpp"
#include "npprov/tensor.hpp"

using namespace npprov;

TEST_CASE("tensor shape and data must agree") {
    CHECK_NOTHROW(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
    CHECK_THROWS_AS(Tensor({2, 3}, {1, 2, 3}), ContractViolation);
    CHECK_THROWS_AS(Tensor({0}), ContractViolation);
    CHECK_THROWS_AS(Tensor({2, -1}), ContractViolation);
}

TEST_CASE("multi-index access is row-major") {
    Tensor t({2, 3}, {0, 1, 2, 3, 4, 5});
    CHECK(t.at({0, 0}) == 0);
    CHECK(t.at({0, 2}) == 2);
    CHECK(t.at({1, 0}) == 3);
    CHECK(t.at({1, 2}) == 5);
}

TEST_CASE("broadcast plan aligns trailing axes") {
    auto p = broadcast_plan({3, 1}, {1, 4});
    CHECK(p.out_shape == Shape{3, 4});
    p = broadcast_plan({5}, {2, 5});
    CHECK(p.out_shape == Shape{2, 5});
    CHECK_THROWS_AS(broadcast_plan({3}, {4}), ContractViolation);
}

TEST_CASE("broadcast iteration visits operands correctly") {
    Tensor a({2, 1}, {10, 20});
    Tensor b({1, 3}, {1, 2, 3});
    auto p = broadcast_plan(a.shape, b.shape);
    Tensor out(p.out_shape);
    for_each_broadcast(p, [&](int64_t o, int64_t ao, int64_t bo) { out[o] = a[ao] + b[bo]; });
    CHECK(out.data == std::vector<double>{11, 12, 13, 21, 22, 23});
}

TEST_CASE("check_finite flags NaN and Inf") {
    Tensor ok({2}, {1.0, 2.0});
    CHECK_NOTHROW(check_finite(ok, "op"));
    Tensor bad({2}, {1.0, std::nan("")});
    CHECK_THROWS_AS(check_finite(bad, "op"), NumericFault);
}

TEST_CASE("counter rng is deterministic and order-free") {
    CounterRng a(42, 7, 1), b(42, 7, 1);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    // distinct streams decorrelate
    CounterRng c(42, 7, 2);
    CHECK(c.next_u64() != CounterRng(42, 7, 1).next_u64());
}

TEST_CASE("uniform_int covers inclusive bounds") {
    CounterRng rng(1, 2, 3);
    bool saw_lo = false, saw_hi = false;
    for (int i = 0; i < 1000; ++i) {
        int64_t v = rng.uniform_int(3, 7);
        REQUIRE(v >= 3);
        REQUIRE(v <= 7);
        saw_lo = saw_lo || v == 3;
        saw_hi = saw_hi || v == 7;
    }
    CHECK(saw_lo);
    CHECK(saw_hi);
}

TEST_CASE("normal draws have unit moments") {
    CounterRng rng(9, 0, 0);
    const int n = 200000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        double v = rng.normal();
        s += v;
        s2 += v * v;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.02);
}
