#include <doctest.h>

#include "graphfb/dense.hpp"
#include "support.hpp"

using namespace graphfb;

TEST_CASE("matmul matches a triple loop") {
    const auto a = testing::random_matrix(4, 3, 1);
    const auto b = testing::random_matrix(3, 5, 2);
    DenseMatrix want(4, 5);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            for (std::size_t k = 0; k < 3; ++k) want(i, j) += a(i, k) * b(k, j);
    CHECK(max_abs_diff(matmul(a, b), want) < 1e-14);
    CHECK(max_abs_diff(matmul_tn(a.transposed(), b), want) < 1e-14);
    CHECK(max_abs_diff(matmul_nt(a, b.transposed()), want) < 1e-14);
}

TEST_CASE("shape errors are reported") {
    DenseMatrix a(2, 3), b(2, 3);
    CHECK_THROWS_AS(matmul(a, b), Error);
    CHECK_THROWS_AS(a += DenseMatrix(3, 2), Error);
    CHECK_THROWS_AS(DenseMatrix(2, 2, std::vector<double>{1, 2, 3}), Error);
}

TEST_CASE("elementwise helpers") {
    DenseMatrix a(2, 2, std::vector<double>{1, -2, 3, -4});
    CHECK(frobenius_sq(a) == 30.0);
    CHECK(max_abs(a) == 4.0);
    CHECK(a.transposed()(0, 1) == 3.0);
    CHECK(a.col(1) == std::vector<double>{-2, -4});
    const auto i = DenseMatrix::identity(2);
    CHECK(matmul(a, i) == a);
    CHECK(shape_str(a) == "2x2");
}
