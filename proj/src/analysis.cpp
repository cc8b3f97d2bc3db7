#include "mtnet/analysis.hpp"

#include <cmath>
#include <stdexcept>

namespace mtnet {

namespace {

constexpr double kZetaSaturation = 50.0;  // sigmoid(+-50) is 1/0 in double precision

// grad_y of mean squared error against `target`, for y = a x (single column x).
Tensor mse_grad_y(const Tensor& y, const Tensor& target)
{
    return (2.0 / static_cast<double>(y.size())) * (y - target);
}

Tensor replicate_mask_rows(const Tensor& mask_rows, int cols)
{
    Tensor m(mask_rows.rows(), cols);
    for (int i = 0; i < mask_rows.rows(); ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = mask_rows(i, 0);
    return m;
}

}  // namespace

void SubspaceBasis::validate() const
{
    if (vectors.empty()) throw std::invalid_argument("SubspaceBasis: empty");
    if (vectors.cols() > vectors.rows())
        throw std::invalid_argument("SubspaceBasis: more vectors than dimensions");
    SvdResult s = jacobi_svd(vectors);
    if (svd_rank(s, 1e-10) != vectors.cols())
        throw std::invalid_argument("SubspaceBasis: columns are not linearly independent");
}

void MetricTensor::validate() const
{
    if (g.rows() != g.cols()) throw std::invalid_argument("MetricTensor: must be square");
    for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < i; ++j)
            if (std::fabs(g(i, j) - g(j, i)) > 1e-12)
                throw std::invalid_argument("MetricTensor: not symmetric");
    cholesky(g);  // throws if not positive definite
}

Tensor effective_metric(const Tensor& t)
{
    if (t.rows() != t.cols()) throw std::invalid_argument("effective_metric: T must be square");
    if (condition_number(t) >= 1e12)
        throw std::invalid_argument("effective_metric: T is singular to working precision");
    return matmul(t, transposed(t));
}

double check_delta_y_norm(const Tensor& t, const Tensor& dw, const Tensor& x)
{
    const Tensor dy = matmul(t, matmul(dw, x));
    double lhs = 0.0;
    for (double v : dy.data()) lhs += v * v;
    const Tensor dwx = matmul(dw, x);
    const Tensor rhs_t = matmul(transposed(dwx), matmul(matmul(transposed(t), t), dwx));
    return std::fabs(lhs - rhs_t(0, 0));
}

double check_mtnet_unroll(const Tensor& t, const Tensor& w, const Tensor& mask_rows,
                          const Tensor& x, const Tensor& target, double alpha)
{
    if (mask_rows.cols() != 1 || mask_rows.rows() != t.rows())
        throw std::invalid_argument("check_mtnet_unroll: mask_rows must be n x 1");
    // associate as T (W x) on both routes so a no-op mask cancels bitwise
    const Tensor y = matmul(t, matmul(w, x));

    // route (a): masked update of W, then forward
    const Tensor grad_y = mse_grad_y(y, target);
    const Tensor grad_a = matmul(grad_y, transposed(x));
    const Tensor grad_w = matmul(transposed(t), grad_a);
    const Tensor mask = replicate_mask_rows(mask_rows, w.cols());
    const Tensor w_new = w - (alpha * hadamard(mask, grad_w));
    const Tensor y_a = matmul(t, matmul(w_new, x));

    // route (b): y - alpha T_M^T T_M grad_A x with T_M = row-masked T^T
    const Tensor t_m = hadamard(replicate_mask_rows(mask_rows, t.rows()), transposed(t));
    const Tensor y_b = y - (alpha * matmul(matmul(transposed(t_m), t_m), matmul(grad_a, x)));

    return max_abs_diff(y_a, y_b);
}

namespace {

Tensor saturated_zeta(int n, int d)
{
    Tensor z(n, 1);
    for (int i = 0; i < n; ++i) z(i, 0) = i < d ? kZetaSaturation : -kZetaSaturation;
    return z;
}

}  // namespace

CellConstruction construct_subspace_cell(const SubspaceBasis& u, const Tensor& a, Rng& rng)
{
    u.validate();
    if (a.rows() != u.ambient())
        throw std::invalid_argument("construct_subspace_cell: A row count must match the ambient space");
    CellConstruction cell;
    cell.T = complete_basis(u.vectors, rng);
    cell.W = lu_solve(cell.T, a);
    cell.zeta = saturated_zeta(u.ambient(), u.dim());
    return cell;
}

CellConstruction construct_metric_cell(const SubspaceBasis& u, const MetricTensor& g,
                                       const Tensor& a, Rng& rng)
{
    u.validate();
    g.validate();
    if (g.g.rows() != u.dim())
        throw std::invalid_argument("construct_metric_cell: metric size must equal subspace dim");
    if (a.rows() != u.ambient())
        throw std::invalid_argument("construct_metric_cell: A row count must match the ambient space");

    // G = H^T H with H = L^T from the Cholesky factor; the warped basis is
    // U H^{-1}, i.e. solve X H = U column-block-wise: H^T X^T = U^T.
    const Tensor l = cholesky(g.g);
    const Tensor x_t = solve_lower_triangular(l, transposed(u.vectors));
    const Tensor warped = transposed(x_t);

    CellConstruction cell;
    cell.T = complete_basis(warped, rng);
    cell.W = lu_solve(cell.T, a);
    cell.zeta = saturated_zeta(u.ambient(), u.dim());
    return cell;
}

SubspaceBasis estimate_update_span(const CellConstruction& cell, const Tensor& x, int n_probes,
                                   Rng& rng, double alpha)
{
    const int n = cell.T.rows();
    if (x.cols() != 1 || x.rows() != cell.W.cols())
        throw std::invalid_argument("estimate_update_span: x must be a column matching W");
    if (frobenius_norm(x) == 0.0)
        throw std::invalid_argument("estimate_update_span: x = 0 never moves the cell output");
    if (n_probes < n)
        throw std::invalid_argument("estimate_update_span: need at least n probes");

    const Tensor mask = replicate_mask_rows(threshold_mask(cell.zeta, false, 1), cell.W.cols());
    const Tensor y = matmul(cell.T, matmul(cell.W, x));

    Tensor deltas(n, n_probes);
    for (int p = 0; p < n_probes; ++p) {
        const Tensor target = gaussian_matrix(n, 1, rng);
        const Tensor grad_w = matmul(transposed(cell.T), matmul(mse_grad_y(y, target),
                                                                transposed(x)));
        const Tensor w_new = cell.W - (alpha * hadamard(mask, grad_w));
        const Tensor dy = matmul(cell.T, matmul(w_new, x)) - y;
        for (int i = 0; i < n; ++i) deltas(i, p) = dy(i, 0);
    }
    return SubspaceBasis{svd_column_basis(deltas, 1e-8)};
}

std::vector<double> expected_mask_fraction(const Network& net, const ParamSet& params)
{
    std::vector<double> fractions;
    fractions.reserve(params.size());
    for (int i = 0; i < net.num_cells(); ++i) {
        if (!net.has_mask()) {
            fractions.push_back(1.0);
            continue;
        }
        const Tensor& zeta = params[static_cast<size_t>(i)].zeta;
        double s = 0.0;
        for (double z : zeta.data()) s += stable_sigmoid(z);
        fractions.push_back(s / static_cast<double>(zeta.size()));
    }
    return fractions;
}

}  // namespace mtnet
