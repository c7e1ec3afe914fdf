#include <doctest.h>

#include <algorithm>
#include <random>

#include "scomo/error.hpp"
#include "support.hpp"

using namespace scomo;
using scomo::test::random_matrix;
using scomo::test::to_eigen;

TEST_CASE("multiply agrees with a naive triple loop") {
    std::mt19937_64 rng(1);
    const Matrix a = random_matrix(17, 9, rng);
    const Matrix b = random_matrix(9, 23, rng);
    CHECK(max_abs_diff(multiply(a, b), test::naive_multiply(a, b)) < 1e-12);
    CHECK(max_abs_diff(multiply_transposed(a, transpose(b)), test::naive_multiply(a, b)) < 1e-12);
}

TEST_CASE("symmetric_eigen matches Eigen's self-adjoint solver") {
    std::mt19937_64 rng(2);
    for (std::size_t n : {1u, 2u, 5u, 12u, 45u}) {
        const Matrix x = random_matrix(n + 7, n, rng);
        const Matrix s = multiply(transpose(x), x);
        const auto mine = symmetric_eigen(s);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(s));
        std::vector<double> oracle(es.eigenvalues().data(), es.eigenvalues().data() + n);
        std::sort(oracle.rbegin(), oracle.rend());
        for (std::size_t i = 0; i < n; ++i) CHECK(mine.values[i] == doctest::Approx(oracle[i]).epsilon(1e-10));
        // A v = lambda v for every returned pair.
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t r = 0; r < n; ++r) {
                double av = 0.0;
                for (std::size_t c = 0; c < n; ++c) av += s(r, c) * mine.vectors(i, c);
                CHECK(std::abs(av - mine.values[i] * mine.vectors(i, r)) < 1e-9 * (1.0 + std::abs(mine.values[0])));
            }
        }
        CHECK(max_abs_diff(multiply_transposed(mine.vectors, mine.vectors), Matrix::identity(n)) < 1e-12);
    }
}

TEST_CASE("svd reconstructs the input and matches oracle singular values") {
    std::mt19937_64 rng(3);
    for (auto [m, n] : {std::pair{4u, 4u}, {10u, 3u}, {3u, 10u}, {45u, 4u}, {1u, 5u}}) {
        const Matrix a = random_matrix(m, n, rng);
        const Svd d = svd(a);
        const std::size_t k = std::min(m, n);
        REQUIRE(d.sigma.size() == k);
        Eigen::JacobiSVD<Eigen::MatrixXd> oracle(to_eigen(a));
        for (std::size_t i = 0; i < k; ++i) CHECK(d.sigma[i] == doctest::Approx(oracle.singularValues()(i)).epsilon(1e-12));
        Matrix us = d.u;
        for (std::size_t i = 0; i < us.rows(); ++i)
            for (std::size_t j = 0; j < k; ++j) us(i, j) *= d.sigma[j];
        CHECK(max_abs_diff(multiply(us, transpose(d.v)), a) < 1e-12);
        CHECK(max_abs_diff(multiply(transpose(d.u), d.u), Matrix::identity(k)) < 1e-12);
        CHECK(max_abs_diff(multiply(transpose(d.v), d.v), Matrix::identity(k)) < 1e-12);
    }
}

TEST_CASE("svd of a rank-deficient matrix still returns orthonormal factors") {
    Matrix a(4, 3);
    for (std::size_t i = 0; i < 4; ++i) {
        a(i, 0) = 1.0 + i;
        a(i, 1) = 2.0 * (1.0 + i);
    }
    const Svd d = svd(a);
    CHECK(d.sigma[2] < 1e-12);
    CHECK(max_abs_diff(multiply(transpose(d.u), d.u), Matrix::identity(3)) < 1e-12);
}

TEST_CASE("orthonormalize_rows spans the input row space") {
    std::mt19937_64 rng(4);
    const Matrix w = random_matrix(4, 45, rng);
    const Matrix q = orthonormalize_rows(w);
    CHECK(max_abs_diff(multiply_transposed(q, q), Matrix::identity(4)) < 1e-12);
    const Eigen::MatrixXd p = to_eigen(q).transpose() * to_eigen(q);
    CHECK((p - test::oracle_projector(w)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("orthonormalize_rows rejects dependent rows") {
    Matrix w = Matrix::from_rows({{1, 2, 3}, {2, 4, 6}});
    CHECK_THROWS_WITH_AS(orthonormalize_rows(w), doctest::Contains("rank deficient"), Error);
}
