#include <doctest.h>

#include <cmath>

#include "graphfb/smoothness.hpp"
#include "support.hpp"

using namespace graphfb;

TEST_CASE("P3 energies against the edge sum") {
    auto op = build_operator(testing::p3(), OperatorKind::L);
    auto x = testing::column({1, 0, -1});
    // (1 - 0)^2 + (0 - (-1))^2
    CHECK(dirichlet_energy(op, x) == 2.0);
    CHECK(signal_energy(x) == 2.0);
    CHECK(s_value(op, x) == 1.0);
    CHECK(dirichlet_energy(op, testing::column({3, 3, 3})) == 0.0);
    CHECK(signal_energy(DenseMatrix(3, 2)) == 0.0);
}

TEST_CASE("edge-sum oracle on random graphs") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto g = random_graph(20, 1, 1, 0.2, seed);
        auto x = testing::random_matrix(20, 3, seed);
        double want = 0.0;
        for (auto [i, j] : g.edge_list())
            for (std::size_t c = 0; c < 3; ++c) want += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
        CHECK(dirichlet_energy(build_operator(g, OperatorKind::L), x) ==
              doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("top eigenvector of L_sym on K3 has energy 1.5") {
    auto op = build_operator(testing::k3(), OperatorKind::Lsym);
    auto e = dense_eig(op);
    DenseMatrix u(3, 1);
    for (std::size_t r = 0; r < 3; ++r) u(r, 0) = e.vectors(r, 2);
    CHECK(dirichlet_energy(op, u) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("orthonormal block has signal energy equal to its width") {
    auto e = dense_eig(build_operator(random_graph(10, 1, 1, 0.3, 2), OperatorKind::Lsym));
    CHECK(signal_energy(e.vectors) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("decomposition and scale invariance") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto g = random_graph(25, 4, 3, 0.2, seed);
        for (auto k : {OperatorKind::L, OperatorKind::Lsym, OperatorKind::HatLsym, OperatorKind::Asym}) {
            auto op = build_operator(g, k);
            auto en = energies(op, g.features());
            CHECK(std::abs(en.dirichlet + en.non_smooth - en.signal) <= 1e-10 * std::abs(en.signal));
            if (is_laplacian_kind(k)) CHECK(en.dirichlet >= 0.0);
            auto scaled = g.features();
            scaled *= 37.5;
            CHECK(s_value(op, scaled) == doctest::Approx(en.s).epsilon(1e-12));
        }
        auto lsym = s_value(build_operator(g, OperatorKind::Lsym), g.features());
        CHECK(lsym >= 0.0);
        CHECK(lsym < 2.0);
    }
}

TEST_CASE("non-smooth energy can be negative") {
    // The alternating signal on K2 has S = 2 under L_sym, so E_NS = -E.
    auto en = energies(build_operator(testing::k2(), OperatorKind::Lsym), testing::column({1, -1}));
    CHECK(en.s == doctest::Approx(2.0));
    CHECK(en.non_smooth < 0.0);
}

TEST_CASE("zero signal is an error") {
    CHECK_THROWS_WITH_AS(s_value(build_operator(testing::k3(), OperatorKind::L), DenseMatrix(3, 1)),
                         doctest::Contains("zero signal"), Error);
    CHECK_THROWS_AS(dirichlet_energy(build_operator(testing::k3(), OperatorKind::L), DenseMatrix(2, 1)),
                    Error);
}

TEST_CASE("one-hot encoding") {
    std::vector<int> labels{0, 2, 1};
    auto y = one_hot(labels, 3);
    CHECK(y == DenseMatrix(3, 3, std::vector<double>{1, 0, 0, 0, 0, 1, 0, 1, 0}));
    CHECK_THROWS_AS(one_hot(std::vector<int>{3}, 3), Error);
    std::vector<int> same(3, 1);
    CHECK(s_value(build_operator(testing::k3(), OperatorKind::L), one_hot(same, 2)) == 0.0);
}

TEST_CASE("smoothness report") {
    auto g = random_graph(30, 5, 3, 0.2, 4);
    auto r = smoothness_report(g, OperatorKind::Lsym, FeatureMode::RowNormalized, "toy");
    CHECK(r.diff == r.label_s - r.feature_s);
    CHECK(r.feature_s == doctest::Approx(
                             s_value(build_operator(g, OperatorKind::Lsym), row_normalize(g.features()))));
    auto text = to_json(r);
    for (const char* key : {"\"feature_S\"", "\"label_S\"", "\"diff\"", "\"energies\"", "\"toy\""})
        CHECK(text.find(key) != std::string::npos);
    CHECK(parse_feature_mode("rownorm") == FeatureMode::RowNormalized);
    CHECK_THROWS_AS(parse_feature_mode("x"), Error);
}
