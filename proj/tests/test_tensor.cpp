#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mtnet/rng.hpp"
#include "mtnet/tensor.hpp"

using namespace mtnet;

TEST_CASE("tensor shape and data invariants")
{
    Tensor t(2, 3);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t.size() == 6);
    CHECK(t.all_finite());

    CHECK_THROWS_AS(Tensor(2, 3, {1.0, 2.0}), std::invalid_argument);

    Tensor s = Tensor::scalar(4.5);
    CHECK(s(0, 0) == 4.5);

    Tensor bad = Tensor::scalar(1.0);
    bad(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_FALSE(bad.all_finite());
}

TEST_CASE("matmul shape algebra")
{
    Tensor a(2, 3), b(3, 1);
    CHECK(matmul(a, b).rows() == 2);
    CHECK(matmul(a, b).cols() == 1);
    CHECK_THROWS_AS(matmul(b, a), std::invalid_argument);
}

TEST_CASE("identity matmul is bitwise transparent")
{
    Rng rng(7);
    Tensor v = gaussian_matrix(5, 3, rng);
    Tensor out = matmul(Tensor::identity(5), v);
    CHECK(bit_equal(out, v));
}

TEST_CASE("elementwise helpers")
{
    Tensor a = Tensor::of({{1.0, -2.0}, {3.0, 0.5}});
    Tensor b = Tensor::of({{2.0, 2.0}, {-1.0, 4.0}});
    CHECK(hadamard(a, b)(0, 1) == -4.0);
    CHECK((a + b)(1, 0) == 2.0);
    CHECK((a - b)(1, 1) == -3.5);
    CHECK((2.0 * a)(0, 0) == 2.0);
    CHECK(transposed(a)(1, 0) == -2.0);
    CHECK(max_abs_diff(a, a) == 0.0);
}

TEST_CASE("truncated normal stays inside the cut")
{
    Rng rng(123);
    Tensor w = truncated_normal_matrix(40, 40, 1e-2, rng);
    for (double v : w.data()) CHECK(std::fabs(v) <= 0.02);
}
