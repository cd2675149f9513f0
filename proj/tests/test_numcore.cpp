#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "osfuse/autodiff.hpp"
#include "osfuse/errors.hpp"
#include "osfuse/rng.hpp"
#include "osfuse/tensor.hpp"

using namespace osf;
using namespace osf::num;

TEST_SUITE_BEGIN("numcore");

TEST_CASE("tensor shape/data invariant") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), DimensionError);
    CHECK_THROWS_AS(Tensor({0, 3}), DimensionError);
}

TEST_CASE("matmul identity and zero") {
    Tensor eye({2, 2}, {1, 0, 0, 1});
    Tensor m({2, 2}, {1, 2, 3, 4});
    Tensor r = matmul(eye, m);
    for (std::size_t i = 0; i < 4; ++i) CHECK(r[i] == doctest::Approx(m[i]));

    Tensor a({1, 2}, {1, 2});
    Tensor z({2, 1}, {0, 0});
    CHECK(matmul(a, z)[0] == 0.0);
}

TEST_CASE("matmul direct evaluation") {
    Tensor a({2, 2}, {1, 1, 1, 1});
    Tensor b({2, 1}, {1, 1});
    Tensor r = matmul(a, b);
    CHECK(r[0] == doctest::Approx(2.0));
    CHECK(r[1] == doctest::Approx(2.0));
}

TEST_CASE("matmul shape error names both shapes") {
    Tensor a({2, 3});
    Tensor b({2, 3});
    try {
        matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
    }
}

TEST_CASE("matmul associativity on random 3x3 chains") {
    SplitMix64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor a({3, 3}), b({3, 3}), c({3, 3});
        for (std::size_t i = 0; i < 9; ++i) {
            a[i] = rng.uniform(-1, 1);
            b[i] = rng.uniform(-1, 1);
            c[i] = rng.uniform(-1, 1);
        }
        Tensor lhs = matmul(matmul(a, b), c);
        Tensor rhs = matmul(a, matmul(b, c));
        for (std::size_t i = 0; i < 9; ++i) CHECK(std::abs(lhs[i] - rhs[i]) < 1e-10);
    }
}

TEST_CASE("softmax symmetry, single element, direct value") {
    Tensor u({3}, {0, 0, 0});
    Tensor s = softmax_lastdim(u);
    for (std::size_t i = 0; i < 3; ++i) CHECK(s[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    Tensor one({1}, {42.0});
    CHECK(softmax_lastdim(one)[0] == doctest::Approx(1.0));

    Tensor x({2}, {2, 0});
    Tensor y = softmax_lastdim(x);
    CHECK(y[0] == doctest::Approx(0.8808).epsilon(1e-4));
    CHECK(y[1] == doctest::Approx(0.1192).epsilon(1e-4));
}

TEST_CASE("softmax rows sum to one and stay finite under large inputs") {
    SplitMix64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x({4, 5});
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-500, 500);
        Tensor y = softmax_lastdim(x);
        CHECK(y.all_finite());
        for (std::size_t r = 0; r < 4; ++r) {
            double s = 0;
            for (std::size_t c = 0; c < 5; ++c) {
                CHECK(y.at(r, c) >= 0.0);
                s += y.at(r, c);
            }
            CHECK(std::abs(s - 1.0) < 1e-12);
        }
    }
    CHECK_THROWS_AS(softmax_lastdim(Tensor{}), DimensionError);
}

TEST_CASE("graph: sum of squares gradient vs finite differences") {
    auto op = [](const std::vector<Var>& ps) { return sum(mul(ps[0], ps[0])); };
    Var x = parameter(Tensor({3}, {1, 2, 3}), "x");
    double err = finite_diff_check(op, {x}, 1e-5);
    CHECK(err < 1e-6);
    // analytic gradient is 2x
    Var loss = op({x});
    GradRecord rec = record_gradients(loss, {x});
    CHECK(rec.grads[0][0] == doctest::Approx(2.0));
    CHECK(rec.grads[0][1] == doctest::Approx(4.0));
    CHECK(rec.grads[0][2] == doctest::Approx(6.0));
    CHECK(rec.grads[0].shape() == rec.params[0].shape());
}

TEST_CASE("graph: constant op has zero gradient and zero fd error") {
    auto op = [](const std::vector<Var>&) { return constant(Tensor::scalar(3.5)); };
    Var x = parameter(Tensor({2}, {0.3, -0.8}), "x");
    CHECK(finite_diff_check(op, {x}, 1e-5) == doctest::Approx(0.0));
}

TEST_CASE("graph: BCE at p=0.5 has slope -2") {
    // loss(p) = -log(p) for target 1
    auto op = [](const std::vector<Var>& ps) { return neg(log(ps[0])); };
    Var p = parameter(Tensor::scalar(0.5), "p");
    CHECK(finite_diff_check(op, {p}, 1e-6) < 1e-5);
    Var loss = op({p});
    GradRecord rec = record_gradients(loss, {p});
    CHECK(rec.grads[0][0] == doctest::Approx(-2.0));
    CHECK(loss->value[0] == doctest::Approx(std::log(2.0)));
}

TEST_CASE("graph: non-scalar loss rejected") {
    auto op = [](const std::vector<Var>& ps) { return mul(ps[0], ps[0]); };
    Var x = parameter(Tensor({2}, {1, 2}), "x");
    CHECK_THROWS_AS(finite_diff_check(op, {x}, 1e-5), ContractError);
    CHECK_THROWS_AS(finite_diff_check(op, {x}, 0.0), ContractError);
}

TEST_CASE("graph: matmul/softmax/transpose/gather gradients") {
    SplitMix64 rng(23);
    Var a = parameter(Tensor({3, 2}), "a");
    Var b = parameter(Tensor({2, 4}), "b");
    for (auto* t : {&a->value, &b->value})
        for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] = rng.uniform(-1, 1);

    auto op = [](const std::vector<Var>& ps) {
        Var prod = matmul(ps[0], ps[1]);
        Var sm = softmax_lastdim(prod);
        Var g = gather_rows(transpose(sm), {1, 3, 0});
        return mean(mul(g, g));
    };
    CHECK(finite_diff_check(op, {a, b}, 1e-5) < 1e-4);
}

TEST_CASE("graph: elementwise chain gradients") {
    Var x = parameter(Tensor({4}, {0.2, -0.4, 1.1, 0.7}), "x");
    auto op = [](const std::vector<Var>& ps) {
        Var y = add(mul(sigmoid(ps[0]), softplus(ps[0])), exp(neg(ps[0])));
        Var z = add(mul(sin(ps[0]), cos(ps[0])), sqrt(add_scalar(mul(ps[0], ps[0]), 1.0)));
        return sum(add(y, z));
    };
    CHECK(finite_diff_check(op, {x}, 1e-5) < 1e-4);
}

TEST_CASE("graph: broadcasting add/mul with scalar and row vector") {
    Var m = parameter(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}), "m");
    Var row = parameter(Tensor({3}, {0.5, -1.0, 2.0}), "row");
    Var s = parameter(Tensor::scalar(0.25), "s");
    auto op = [](const std::vector<Var>& ps) {
        return sum(mul(add(ps[0], ps[1]), ps[2]));
    };
    CHECK(finite_diff_check(op, {m, row, s}, 1e-5) < 1e-6);
}

TEST_CASE("graph: concat/pick/mean_rows gradients") {
    Var a = parameter(Tensor({1, 3}, {1, 2, 3}), "a");
    Var b = parameter(Tensor({2, 3}, {4, 5, 6, 7, 8, 9}), "b");
    auto op = [](const std::vector<Var>& ps) {
        Var c = concat_rows({ps[0], ps[1]});
        Var mr = mean_rows(c);
        return add(pick(mr, 1), mean(c));
    };
    CHECK(finite_diff_check(op, {a, b}, 1e-5) < 1e-6);
}

TEST_CASE("operations on finite inputs stay finite") {
    SplitMix64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        Tensor x({3, 3});
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-50, 50);
        Tensor y = softmax_lastdim(matmul(x, transpose(x)));
        CHECK(y.all_finite());
    }
}

TEST_SUITE_END();
