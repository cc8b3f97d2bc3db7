#pragma once

#include <vector>

#include "mtnet/rng.hpp"
#include "mtnet/tensor.hpp"

namespace mtnet {

struct SvdResult {
    Tensor u;                   // m x k, orthonormal columns (k = min(m, n))
    std::vector<double> sigma;  // descending, length k
    Tensor v;                   // n x k
};

// One-sided Jacobi SVD; intended for the small matrices used here.
SvdResult jacobi_svd(const Tensor& a);

int svd_rank(const SvdResult& s, double rel_threshold);

// Columns of a with singular value > rel_threshold * sigma_max, orthonormal.
Tensor svd_column_basis(const Tensor& a, double rel_threshold);

double condition_number(const Tensor& a);

// Orthonormalizes the columns of a (modified Gram-Schmidt, two passes).
// Throws if the columns are not linearly independent.
Tensor orthonormalize_columns(const Tensor& a);

// Extends the n x d matrix `basis` to n linearly independent columns using
// random Gaussian draws orthogonalized against everything accepted so far.
// Appended columns are unit length with their largest-magnitude entry positive.
Tensor complete_basis(const Tensor& basis, Rng& rng);

// Solves a x = b via LU with partial pivoting (a square).
Tensor lu_solve(const Tensor& a, const Tensor& b);

// Lower-triangular L with a = L L^T; throws if a is not positive definite.
Tensor cholesky(const Tensor& a);

// L x = b (forward) and U x = b (backward) substitution, column-wise.
Tensor solve_lower_triangular(const Tensor& l, const Tensor& b);
Tensor solve_upper_triangular(const Tensor& u, const Tensor& b);

// Principal angles (radians, ascending) between the column spans of a and b.
std::vector<double> principal_angles(const Tensor& a, const Tensor& b);

}  // namespace mtnet
