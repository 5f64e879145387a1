#include <doctest.h>

#include <cmath>
#include <limits>

#include "graphfb/autodiff.hpp"
#include "support.hpp"

using namespace graphfb;

TEST_CASE("relu backward") {
    Tape t;
    Var x = t.variable(DenseMatrix(1, 3, std::vector<double>{-1.0, 0.0, 2.0}));
    t.backward(t.sum(t.relu(x)));
    CHECK(t.grad(x) == DenseMatrix(1, 3, std::vector<double>{0, 0, 1}));
}

TEST_CASE("spmm with an identity pair passes values and gradients through") {
    auto g = random_graph(6, 1, 1, 0.4, 1);
    auto lp = build_operator(g, OperatorKind::HatAsym);
    auto hp = build_operator(g, OperatorKind::HatLsym);
    Tape t;
    auto xv = testing::random_matrix(6, 2, 3);
    Var x = t.variable(xv);
    Var y = t.add(t.spmm(lp, x), t.spmm(hp, x));
    CHECK(max_abs_diff(t.value(y), xv) < 1e-14);
    t.backward(t.sum(y));
    CHECK(max_abs_diff(t.grad(x), DenseMatrix(6, 2, 1.0)) < 1e-14);
}

TEST_CASE("sum of a parameter gives all-ones and backward accumulates") {
    Parameter p{"p", testing::random_matrix(2, 3, 1), DenseMatrix(2, 3)};
    for (int k = 1; k <= 2; ++k) {
        Tape t;
        t.backward(t.sum(t.parameter(p)));
        CHECK(p.grad == DenseMatrix(2, 3, static_cast<double>(k)));
    }
    p.zero_grad();
    CHECK(p.grad == DenseMatrix(2, 3));
}

TEST_CASE("backward needs a scalar") {
    Tape t;
    Var x = t.variable(DenseMatrix(2, 2, 1.0));
    CHECK_THROWS_AS(t.backward(x), Error);
    CHECK_THROWS_AS(t.matmul(x, t.variable(DenseMatrix(3, 1))), Error);
    Rng rng(0);
    CHECK_THROWS_AS(t.dropout(x, 1.0, true, rng), Error);
}

TEST_CASE("all ops against finite differences") {
    auto g = random_graph(5, 1, 1, 0.5, 2);
    auto op = build_operator(g, OperatorKind::Lrw);
    std::vector<Parameter> params{
        {"x", testing::random_matrix(5, 4, 1), DenseMatrix(5, 4)},
        {"w", testing::random_matrix(4, 3, 2), DenseMatrix(4, 3)},
        {"s", DenseMatrix(1, 1, 0.3), DenseMatrix(1, 1)},
    };
    std::vector<int> labels{0, 1, 2, 1, 0};
    std::vector<std::size_t> mask{0, 2, 3};
    LossFn loss = [&](bool with_grad) {
        Tape t;
        Var x = t.parameter(params[0]);
        Var h = t.spmm(op, t.matmul(x, t.parameter(params[1])));
        Var a = t.sigmoid(t.parameter(params[2]));
        Var z = t.add(t.scale(t.relu(h), a), t.sigmoid(h));
        Var l = t.add(t.softmax_cross_entropy(z, labels, mask), t.scale(t.sum(z), a));
        if (with_grad) t.backward(l);
        return t.value(l)(0, 0);
    };
    auto r = grad_check(loss, params);
    CHECK(r.checked > 20);
    CHECK(r.max_rel_err < 1e-5);
}

TEST_CASE("linear model gradient is exact to rounding") {
    std::vector<Parameter> params{{"w", testing::random_matrix(3, 2, 5), DenseMatrix(3, 2)}};
    // Positive inputs keep every gradient entry well away from zero.
    DenseMatrix x(4, 3);
    Rng rng(6);
    for (double& v : x.data()) v = rng.uniform(1.0, 2.0);
    LossFn loss = [&](bool with_grad) {
        Tape t;
        Var l = t.sum(t.matmul(t.constant(x), t.parameter(params[0])));
        if (with_grad) t.backward(l);
        return t.value(l)(0, 0);
    };
    CHECK(grad_check(loss, params).max_rel_err < 1e-9);
}

TEST_CASE("relu kinks are skipped rather than reported") {
    std::vector<Parameter> params{{"w", DenseMatrix(1, 2, std::vector<double>{0.0, 1.0}), DenseMatrix(1, 2)}};
    LossFn loss = [&](bool with_grad) {
        Tape t;
        Var l = t.sum(t.relu(t.parameter(params[0])));
        if (with_grad) t.backward(l);
        return t.value(l)(0, 0);
    };
    auto r = grad_check(loss, params);
    CHECK(r.skipped_kinks == 1);
    CHECK(r.checked == 1);
    CHECK(r.max_rel_err < 1e-9);
}

TEST_CASE("masked loss leaves other rows without gradient") {
    Tape t;
    Var z = t.variable(testing::random_matrix(5, 3, 2));
    std::vector<int> labels{0, 1, 2, 0, 1};
    std::vector<std::size_t> mask{1, 3};
    t.backward(t.softmax_cross_entropy(z, labels, mask));
    for (std::size_t i : {0, 2, 4})
        for (double v : t.grad(z).row(i)) CHECK(v == 0.0);
    for (std::size_t i : {1, 3}) {
        double s = 0.0;
        for (double v : t.grad(z).row(i)) s += v;
        CHECK(std::abs(s) < 1e-15);
    }
}

TEST_CASE("inverted dropout") {
    Rng a(9), b(9);
    Tape t;
    Var x = t.constant(DenseMatrix(200, 50, 1.0));
    auto y1 = t.value(t.dropout(x, 0.3, true, a));
    auto y2 = t.value(t.dropout(x, 0.3, true, b));
    CHECK(y1 == y2);
    double s = 0.0;
    for (double v : y1.data()) {
        CHECK((v == 0.0 || std::abs(v - 1.0 / 0.7) < 1e-15));
        s += v;
    }
    CHECK(s / 10000.0 == doctest::Approx(1.0).epsilon(0.03));
    CHECK(t.value(t.dropout(x, 0.3, false, a)) == t.value(x));
}

TEST_CASE("Adam first step moves by about lr") {
    std::vector<Parameter> p{{"p", DenseMatrix(1, 1, 1.0), DenseMatrix(1, 1, 1.0)}};
    Adam adam({0.1, 0.9, 0.999, 1e-8, 0.0});
    adam.step(p);
    // m̂ = 1, v̂ = 1, so the step is lr / (1 + eps).
    CHECK(p[0].value(0, 0) == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-15));
}

TEST_CASE("Adam leaves parameters alone on zero gradient") {
    std::vector<Parameter> p{{"p", testing::random_matrix(2, 2, 1), DenseMatrix(2, 2)}};
    const auto before = p[0].value;
    Adam adam({0.1, 0.9, 0.999, 1e-8, 0.0});
    for (int i = 0; i < 5; ++i) adam.step(p);
    CHECK(p[0].value == before);
}

TEST_CASE("Adam matches a reference recurrence and minimizes a bowl") {
    std::vector<Parameter> p{{"p", DenseMatrix(1, 1, 1.0), DenseMatrix(1, 1)}};
    Adam adam({0.05, 0.9, 0.999, 1e-8, 0.01});
    double q = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 200; ++t) {
        p[0].grad(0, 0) = 2.0 * p[0].value(0, 0);
        adam.step(p);
        const double g = 2.0 * q + 0.01 * q;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
        q -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    }
    CHECK(p[0].value(0, 0) == doctest::Approx(q).epsilon(1e-12));
    CHECK(std::abs(q) < 1e-3);
}

TEST_CASE("Adam rejects non-finite gradients") {
    std::vector<Parameter> p{{"p", DenseMatrix(1, 1, 1.0),
                              DenseMatrix(1, 1, std::numeric_limits<double>::quiet_NaN())}};
    Adam adam({});
    CHECK_THROWS_AS(adam.step(p), Error);
}
