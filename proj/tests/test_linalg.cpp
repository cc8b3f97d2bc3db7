#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mtnet/linalg.hpp"

using namespace mtnet;

TEST_CASE("jacobi svd factors random matrices")
{
    Rng rng(5);
    for (int n : {1, 3, 7, 16}) {
        Tensor a = gaussian_matrix(n + 2, n, rng);
        SvdResult s = jacobi_svd(a);
        // reconstruct U diag(sigma) V^T
        Tensor us = s.u;
        for (int j = 0; j < us.cols(); ++j)
            for (int i = 0; i < us.rows(); ++i) us(i, j) *= s.sigma[static_cast<size_t>(j)];
        CHECK(max_abs_diff(matmul(us, transposed(s.v)), a) < 1e-11);
        // orthonormal factors
        CHECK(max_abs_diff(matmul(transposed(s.u), s.u), Tensor::identity(n)) < 1e-12);
        CHECK(max_abs_diff(matmul(transposed(s.v), s.v), Tensor::identity(n)) < 1e-12);
        for (size_t i = 1; i < s.sigma.size(); ++i) CHECK(s.sigma[i - 1] >= s.sigma[i]);
    }
}

TEST_CASE("svd handles wide matrices and rank deficiency")
{
    Rng rng(6);
    Tensor thin = gaussian_matrix(3, 8, rng);
    SvdResult s = jacobi_svd(thin);
    CHECK(s.u.rows() == 3);
    Tensor us = s.u;
    for (int j = 0; j < us.cols(); ++j)
        for (int i = 0; i < us.rows(); ++i) us(i, j) *= s.sigma[static_cast<size_t>(j)];
    CHECK(max_abs_diff(matmul(us, transposed(s.v)), thin) < 1e-11);

    // duplicate a column: rank drops by one
    Tensor a = gaussian_matrix(6, 3, rng);
    Tensor b(6, 4);
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 3; ++j) b(i, j) = a(i, j);
        b(i, 3) = a(i, 0);
    }
    CHECK(svd_rank(jacobi_svd(b), 1e-10) == 3);
}

TEST_CASE("lu solve and triangular solves")
{
    Rng rng(7);
    Tensor a = gaussian_matrix(9, 9, rng);
    Tensor x_true = gaussian_matrix(9, 2, rng);
    Tensor b = matmul(a, x_true);
    CHECK(max_abs_diff(lu_solve(a, b), x_true) < 1e-10);
    CHECK_THROWS_AS(lu_solve(Tensor(3, 3), Tensor(3, 1)), std::invalid_argument);

    Tensor spd = matmul(transposed(a), a) + (0.5 * Tensor::identity(9));
    Tensor l = cholesky(spd);
    CHECK(max_abs_diff(matmul(l, transposed(l)), spd) < 1e-10);
    Tensor y = solve_lower_triangular(l, b);
    CHECK(max_abs_diff(matmul(l, y), b) < 1e-10);
    Tensor z = solve_upper_triangular(transposed(l), y);
    CHECK(max_abs_diff(matmul(spd, z), b) < 1e-9);
}

TEST_CASE("cholesky rejects indefinite matrices")
{
    Tensor notpd = Tensor::of({{1.0, 2.0}, {2.0, 1.0}});
    CHECK_THROWS_AS(cholesky(notpd), std::invalid_argument);
}

TEST_CASE("basis completion spans the whole space")
{
    Rng rng(8);
    for (int n : {2, 5, 11}) {
        const int d = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n));
        Tensor u = gaussian_matrix(n, d, rng);
        Tensor full = complete_basis(u, rng);
        CHECK(full.rows() == n);
        CHECK(full.cols() == n);
        // first d columns are u, untouched
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < n; ++i) CHECK(full(i, j) == u(i, j));
        CHECK(condition_number(full) < 1e6);
        // appended columns are orthogonal to span(u)
        Tensor q = orthonormalize_columns(u);
        for (int j = d; j < n; ++j) {
            for (int k = 0; k < d; ++k) {
                double dot = 0.0;
                for (int i = 0; i < n; ++i) dot += q(i, k) * full(i, j);
                CHECK(std::fabs(dot) < 1e-10);
            }
        }
    }
    CHECK_THROWS_AS(orthonormalize_columns(Tensor(4, 2)), std::invalid_argument);
}

TEST_CASE("principal angles separate equal and orthogonal spans")
{
    Rng rng(9);
    Tensor u = gaussian_matrix(6, 2, rng);
    auto angles_same = principal_angles(u, 2.5 * u);
    for (double a : angles_same) CHECK(a < 1e-7);

    Tensor e01 = Tensor::zeros(4, 2);
    e01(0, 0) = 1.0;
    e01(1, 1) = 1.0;
    Tensor e23 = Tensor::zeros(4, 2);
    e23(2, 0) = 1.0;
    e23(3, 1) = 1.0;
    auto angles_orth = principal_angles(e01, e23);
    for (double a : angles_orth) CHECK(std::fabs(a - std::acos(0.0)) < 1e-12);
}
