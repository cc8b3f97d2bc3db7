#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mtnet/analysis.hpp"

using namespace mtnet;

TEST_CASE("effective metric")
{
    CHECK(max_abs_diff(effective_metric(Tensor::identity(3)), Tensor::identity(3)) == 0.0);

    Tensor diag = Tensor::of({{2.0, 0.0}, {0.0, 1.0}});
    Tensor expect = Tensor::of({{4.0, 0.0}, {0.0, 1.0}});
    CHECK(max_abs_diff(effective_metric(diag), expect) == 0.0);

    Tensor singular = Tensor::of({{1.0, 1.0}, {1.0, 1.0}});
    CHECK_THROWS_AS(effective_metric(singular), std::invalid_argument);
    CHECK_THROWS_AS(effective_metric(Tensor(2, 3)), std::invalid_argument);
}

TEST_CASE("squared output change identity")
{
    SUBCASE("identity T on the ones vector")
    {
        // T = I, dW x = (1, 1)^T: both sides are 2
        Tensor dw = Tensor::identity(2);
        Tensor x = Tensor::column({1.0, 1.0});
        CHECK(check_delta_y_norm(Tensor::identity(2), dw, x) == 0.0);
    }
    SUBCASE("diagonal T weighs the components")
    {
        // T = diag(2, 1): ||T dW x||^2 = 4 + 1 = 5
        Tensor t = Tensor::of({{2.0, 0.0}, {0.0, 1.0}});
        Tensor dw = Tensor::identity(2);
        Tensor x = Tensor::column({1.0, 1.0});
        const Tensor dy = matmul(t, matmul(dw, x));
        double lhs = 0.0;
        for (double v : dy.data()) lhs += v * v;
        CHECK(lhs == 5.0);
        CHECK(check_delta_y_norm(t, dw, x) == 0.0);
    }
    SUBCASE("residual stays tiny over random instances")
    {
        Rng rng(70);
        for (int i = 0; i < 100; ++i) {
            const int n = 1 + static_cast<int>(rng.next_u64() % 16);
            const int m = 1 + static_cast<int>(rng.next_u64() % 16);
            Tensor t = (1.0 / std::sqrt(n)) * gaussian_matrix(n, n, rng);
            Tensor dw = (1.0 / std::sqrt(n)) * gaussian_matrix(n, m, rng);
            Tensor x = gaussian_matrix(m, 1, rng);
            CHECK(check_delta_y_norm(t, dw, x) <= 1e-10);
        }
    }
}

TEST_CASE("masked unroll identity")
{
    Rng rng(71);
    SUBCASE("all-zero mask leaves y exactly in place")
    {
        const int n = 5, m = 3;
        Tensor t = gaussian_matrix(n, n, rng);
        Tensor w = gaussian_matrix(n, m, rng);
        Tensor x = gaussian_matrix(m, 1, rng);
        Tensor target = gaussian_matrix(n, 1, rng);
        CHECK(check_mtnet_unroll(t, w, Tensor::zeros(n, 1), x, target, 0.5) == 0.0);
    }
    SUBCASE("random masks match the closed form")
    {
        for (int i = 0; i < 100; ++i) {
            const int n = 1 + static_cast<int>(rng.next_u64() % 16);
            const int m = 1 + static_cast<int>(rng.next_u64() % 16);
            Tensor t = (1.0 / std::sqrt(n)) * gaussian_matrix(n, n, rng);
            Tensor w = (1.0 / std::sqrt(n)) * gaussian_matrix(n, m, rng);
            Tensor x = gaussian_matrix(m, 1, rng);
            Tensor target = gaussian_matrix(n, 1, rng);
            Tensor mask(n, 1);
            for (int r = 0; r < n; ++r) mask(r, 0) = rng.uniform() < 0.5 ? 1.0 : 0.0;
            CHECK(check_mtnet_unroll(t, w, mask, x, target, 0.3) <= 1e-10);
        }
    }
    SUBCASE("mask shape is validated")
    {
        CHECK_THROWS_AS(check_mtnet_unroll(Tensor::identity(3), Tensor(3, 2), Tensor(2, 1),
                                           Tensor(2, 1), Tensor(3, 1), 0.1),
                        std::invalid_argument);
    }
}

TEST_CASE("subspace construction, axis-aligned case")
{
    // U = span{e1, e2} in R^3, A = I: T = I, W = I, zeta = (50, 50, -50)
    Rng rng(72);
    SubspaceBasis u;
    u.vectors = Tensor::zeros(3, 2);
    u.vectors(0, 0) = 1.0;
    u.vectors(1, 1) = 1.0;
    CellConstruction cell = construct_subspace_cell(u, Tensor::identity(3), rng);
    CHECK(max_abs_diff(cell.T, Tensor::identity(3)) < 1e-12);
    CHECK(max_abs_diff(cell.W, Tensor::identity(3)) < 1e-12);
    CHECK(cell.zeta(0, 0) == 50.0);
    CHECK(cell.zeta(1, 0) == 50.0);
    CHECK(cell.zeta(2, 0) == -50.0);
}

TEST_CASE("construction reconstructs A and recovers the span")
{
    Rng rng(73);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 15);
        const int d = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n));
        const int m = 1 + static_cast<int>(rng.next_u64() % 16);
        SubspaceBasis u{gaussian_matrix(n, d, rng)};
        Tensor a = gaussian_matrix(n, m, rng);
        CellConstruction cell = construct_subspace_cell(u, a, rng);
        CHECK(max_abs_diff(matmul(cell.T, cell.W), a) <= 1e-8);

        Tensor x = gaussian_matrix(m, 1, rng);
        SubspaceBasis span = estimate_update_span(cell, x, 2 * n + 4, rng);
        REQUIRE(span.dim() == d);
        auto angles = principal_angles(span.vectors, u.vectors);
        CHECK(angles.back() <= 1e-6);
    }
}

TEST_CASE("construction rejects rank-deficient bases")
{
    Rng rng(74);
    Tensor dep(4, 2);
    for (int i = 0; i < 4; ++i) {
        dep(i, 0) = static_cast<double>(i + 1);
        dep(i, 1) = 2.0 * (i + 1);
    }
    SubspaceBasis u{dep};
    CHECK_THROWS_AS(construct_subspace_cell(u, Tensor::identity(4), rng), std::invalid_argument);
}

TEST_CASE("update span edge cases")
{
    Rng rng(75);
    SubspaceBasis u{gaussian_matrix(4, 2, rng)};
    CellConstruction cell = construct_subspace_cell(u, gaussian_matrix(4, 3, rng), rng);

    SUBCASE("x = 0 is rejected")
    {
        CHECK_THROWS_AS(estimate_update_span(cell, Tensor::zeros(3, 1), 10, rng),
                        std::invalid_argument);
    }
    SUBCASE("too few probes are rejected")
    {
        CHECK_THROWS_AS(estimate_update_span(cell, Tensor::ones(3, 1), 2, rng),
                        std::invalid_argument);
    }
    SUBCASE("all-off gates give rank zero")
    {
        CellConstruction off = cell;
        for (double& z : off.zeta.data()) z = -50.0;
        SubspaceBasis span = estimate_update_span(off, Tensor::ones(3, 1), 10, rng);
        CHECK(span.dim() == 0);
    }
    SUBCASE("all-on gates with generic T give full rank")
    {
        CellConstruction on = cell;
        for (double& z : on.zeta.data()) z = 50.0;
        SubspaceBasis span = estimate_update_span(on, Tensor::ones(3, 1), 12, rng);
        CHECK(span.dim() == 4);
    }
}

TEST_CASE("metric construction realizes preconditioned steepest descent")
{
    Rng rng(76);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 10);
        const int d = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n));
        SubspaceBasis u{gaussian_matrix(n, d, rng)};
        Tensor b = gaussian_matrix(d, d, rng);
        MetricTensor g{matmul(transposed(b), b) + (0.3 * Tensor::identity(d))};
        Tensor a = gaussian_matrix(n, n, rng);
        CellConstruction cell = construct_metric_cell(u, g, a, rng);
        CHECK(max_abs_diff(matmul(cell.T, cell.W), a) <= 1e-8);

        // realized direction vs V G^{-1} V^T (-grad)
        Tensor x = gaussian_matrix(n, 1, rng);
        Tensor y = matmul(a, x);
        Tensor target = gaussian_matrix(n, 1, rng);
        Tensor grad_y = (2.0 / n) * (y - target);
        Tensor mask(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) mask(r, c) = cell.zeta(r, 0) > 0.0 ? 1.0 : 0.0;
        Tensor grad_w = matmul(transposed(cell.T), matmul(grad_y, transposed(x)));
        Tensor w_new = cell.W - hadamard(mask, grad_w);
        Tensor dy = matmul(cell.T, matmul(w_new, x)) - y;

        Tensor l = cholesky(g.g);
        Tensor rhs = matmul(transposed(u.vectors), -1.0 * grad_y);
        Tensor c = solve_upper_triangular(transposed(l), solve_lower_triangular(l, rhs));
        Tensor oracle = matmul(u.vectors, c);

        const double cos = dot_flat(dy, oracle) / (frobenius_norm(dy) * frobenius_norm(oracle));
        CHECK(cos >= 1.0 - 1e-6);
    }
}

TEST_CASE("metric construction with G = I reduces to the plain construction")
{
    Rng rng(77);
    SubspaceBasis u{gaussian_matrix(5, 2, rng)};
    Tensor a = gaussian_matrix(5, 4, rng);
    Rng rng_a = rng, rng_b = rng;  // same completion draws on both paths
    CellConstruction p1 = construct_subspace_cell(u, a, rng_a);
    MetricTensor g{Tensor::identity(2)};
    CellConstruction p2 = construct_metric_cell(u, g, a, rng_b);
    CHECK(max_abs_diff(p1.T, p2.T) < 1e-12);
    CHECK(max_abs_diff(p1.W, p2.W) < 1e-12);
}

TEST_CASE("one-dimensional subspace pins the update direction")
{
    Rng rng(78);
    SubspaceBasis u{gaussian_matrix(6, 1, rng)};
    MetricTensor g{Tensor::scalar(2.5)};
    Tensor a = gaussian_matrix(6, 6, rng);
    CellConstruction cell = construct_metric_cell(u, g, a, rng);

    Tensor x = gaussian_matrix(6, 1, rng);
    SubspaceBasis span = estimate_update_span(cell, x, 10, rng);
    REQUIRE(span.dim() == 1);
    auto angles = principal_angles(span.vectors, u.vectors);
    CHECK(angles.back() <= 1e-6);
}

TEST_CASE("metric validation")
{
    MetricTensor asym{Tensor::of({{1.0, 0.5}, {0.2, 1.0}})};
    CHECK_THROWS_AS(asym.validate(), std::invalid_argument);
    MetricTensor indef{Tensor::of({{1.0, 2.0}, {2.0, 1.0}})};
    CHECK_THROWS_AS(indef.validate(), std::invalid_argument);
    MetricTensor ok{Tensor::of({{2.0, 0.3}, {0.3, 1.0}})};
    ok.validate();
}

TEST_CASE("expected update fraction per layer")
{
    Network net;
    net.kind = ModelKind::Mtnet;
    net.layer_sizes = {2, 4, 1};
    Rng rng(79);
    ParamSet params = init_params(net, rng);

    SUBCASE("zeta = 0 gives one half everywhere")
    {
        auto fr = expected_mask_fraction(net, params);
        REQUIRE(fr.size() == 2);
        CHECK(fr[0] == 0.5);
        CHECK(fr[1] == 0.5);
    }
    SUBCASE("saturated rows average out")
    {
        params[0].zeta(0, 0) = 50.0;
        params[0].zeta(1, 0) = -50.0;
        params[0].zeta(2, 0) = 50.0;
        params[0].zeta(3, 0) = -50.0;
        auto fr = expected_mask_fraction(net, params);
        CHECK(fr[0] == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("hard-mask Monte Carlo agrees with the sigmoid mean")
    {
        params[0].zeta = Tensor::column({1.0, -0.5, 0.3, 2.0});
        double expect = 0.0;
        for (double z : params[0].zeta.data()) expect += stable_sigmoid(z);
        expect /= 4.0;
        Rng mc(80);
        double seen = 0.0;
        const int draws = 10000;
        for (int i = 0; i < draws; ++i) {
            Tensor m = sample_mask_hard(params[0].zeta, false, net.cell_in(0), mc);
            double on = 0.0;
            for (int r = 0; r < 4; ++r) on += m(r, 0);
            seen += on / 4.0;
        }
        CHECK(std::fabs(seen / draws - expect) < 0.02);
    }
    SUBCASE("maskless models adapt every weight")
    {
        Network plain;
        plain.kind = ModelKind::Maml;
        plain.layer_sizes = {2, 4, 1};
        ParamSet pp = init_params(plain, rng);
        auto fr = expected_mask_fraction(plain, pp);
        CHECK(fr[0] == 1.0);
        CHECK(fr[1] == 1.0);
    }
}
