#include "mtnet/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mtnet {

namespace {

// One-sided Jacobi on the columns of `work` (m x n, m >= n is not required).
// Accumulates the right rotations into v.
void jacobi_sweep_loop(Tensor& work, Tensor& v)
{
    const int n = work.cols();
    const int m = work.rows();
    const double eps = 1e-15;
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (int i = 0; i < m; ++i) {
                    app += work(i, p) * work(i, p);
                    aqq += work(i, q) * work(i, q);
                    apq += work(i, p) * work(i, q);
                }
                if (std::fabs(apq) <= eps * std::sqrt(app * aqq) || apq == 0.0) continue;
                rotated = true;
                const double tau = (aqq - app) / (2.0 * apq);
                const double sign = tau >= 0.0 ? 1.0 : -1.0;
                const double t = sign / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (int i = 0; i < m; ++i) {
                    const double wp = work(i, p), wq = work(i, q);
                    work(i, p) = c * wp - s * wq;
                    work(i, q) = s * wp + c * wq;
                }
                for (int i = 0; i < n; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }
}

}  // namespace

SvdResult jacobi_svd(const Tensor& a)
{
    if (a.empty()) throw std::invalid_argument("jacobi_svd: empty matrix");
    if (a.rows() < a.cols()) {
        SvdResult s = jacobi_svd(transposed(a));
        std::swap(s.u, s.v);
        return s;
    }
    const int m = a.rows(), n = a.cols();
    Tensor work = a;
    Tensor v = Tensor::identity(n);
    jacobi_sweep_loop(work, v);

    std::vector<double> sigma(n);
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < m; ++i) s += work(i, j) * work(i, j);
        sigma[j] = std::sqrt(s);
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return sigma[x] > sigma[y]; });

    SvdResult out;
    out.sigma.resize(n);
    out.u = Tensor(m, n);
    out.v = Tensor(n, n);
    for (int k = 0; k < n; ++k) {
        const int j = order[k];
        out.sigma[k] = sigma[j];
        const double inv = sigma[j] > 0.0 ? 1.0 / sigma[j] : 0.0;
        for (int i = 0; i < m; ++i) out.u(i, k) = work(i, j) * inv;
        for (int i = 0; i < n; ++i) out.v(i, k) = v(i, j);
    }
    return out;
}

int svd_rank(const SvdResult& s, double rel_threshold)
{
    if (s.sigma.empty()) return 0;
    const double cut = rel_threshold * s.sigma.front();
    int r = 0;
    for (double x : s.sigma)
        if (x > cut) ++r;
    return r;
}

Tensor svd_column_basis(const Tensor& a, double rel_threshold)
{
    SvdResult s = jacobi_svd(a);
    const int r = svd_rank(s, rel_threshold);
    Tensor basis(a.rows(), r);
    for (int j = 0; j < r; ++j)
        for (int i = 0; i < a.rows(); ++i) basis(i, j) = s.u(i, j);
    return basis;
}

double condition_number(const Tensor& a)
{
    SvdResult s = jacobi_svd(a);
    const double lo = s.sigma.back();
    if (lo <= 0.0) return std::numeric_limits<double>::infinity();
    return s.sigma.front() / lo;
}

namespace {

double column_norm(const Tensor& a, int j)
{
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

// Removes from col its projection on the orthonormal columns q[0..count).
void orthogonalize_against(std::vector<double>& col, const Tensor& q, int count)
{
    const int n = static_cast<int>(col.size());
    for (int k = 0; k < count; ++k) {
        double d = 0.0;
        for (int i = 0; i < n; ++i) d += q(i, k) * col[static_cast<size_t>(i)];
        for (int i = 0; i < n; ++i) col[static_cast<size_t>(i)] -= d * q(i, k);
    }
}

}  // namespace

Tensor orthonormalize_columns(const Tensor& a)
{
    const int n = a.rows(), d = a.cols();
    Tensor q(n, d);
    for (int j = 0; j < d; ++j) {
        std::vector<double> col(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) col[static_cast<size_t>(i)] = a(i, j);
        const double orig = column_norm(a, j);
        orthogonalize_against(col, q, j);
        orthogonalize_against(col, q, j);  // second pass for stability
        double nrm = 0.0;
        for (double v : col) nrm += v * v;
        nrm = std::sqrt(nrm);
        if (!(nrm > 1e-12 * std::max(orig, 1.0)))
            throw std::invalid_argument("orthonormalize_columns: rank-deficient input");
        for (int i = 0; i < n; ++i) q(i, j) = col[static_cast<size_t>(i)] / nrm;
    }
    return q;
}

Tensor complete_basis(const Tensor& basis, Rng& rng)
{
    const int n = basis.rows(), d = basis.cols();
    if (d > n) throw std::invalid_argument("complete_basis: more columns than rows");
    Tensor q = orthonormalize_columns(basis);  // used only to orthogonalize candidates
    Tensor full(n, n);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < n; ++i) full(i, j) = basis(i, j);

    Tensor accepted(n, n - d);
    int count = 0;
    while (count < n - d) {
        std::vector<double> cand(static_cast<size_t>(n));
        for (auto& v : cand) v = rng.normal();
        // orthogonalize against the span so far: q columns plus accepted ones
        Tensor stack(n, d + count);
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < n; ++i) stack(i, j) = q(i, j);
        for (int j = 0; j < count; ++j)
            for (int i = 0; i < n; ++i) stack(i, d + j) = accepted(i, j);
        orthogonalize_against(cand, stack, d + count);
        orthogonalize_against(cand, stack, d + count);
        double nrm = 0.0;
        for (double v : cand) nrm += v * v;
        nrm = std::sqrt(nrm);
        if (nrm < 1e-8) continue;  // unlucky draw, retry
        int arg = 0;
        for (int i = 1; i < n; ++i)
            if (std::fabs(cand[static_cast<size_t>(i)]) > std::fabs(cand[static_cast<size_t>(arg)]))
                arg = i;
        const double sign = cand[static_cast<size_t>(arg)] >= 0.0 ? 1.0 : -1.0;
        for (int i = 0; i < n; ++i) accepted(i, count) = sign * cand[static_cast<size_t>(i)] / nrm;
        ++count;
    }
    for (int j = 0; j < n - d; ++j)
        for (int i = 0; i < n; ++i) full(i, d + j) = accepted(i, j);
    return full;
}

Tensor lu_solve(const Tensor& a, const Tensor& b)
{
    if (a.rows() != a.cols())
        throw std::invalid_argument("lu_solve: matrix must be square");
    if (a.rows() != b.rows())
        throw std::invalid_argument("lu_solve: size mismatch");
    const int n = a.rows(), m = b.cols();
    Tensor lu = a;
    Tensor x = b;
    std::vector<int> piv(static_cast<size_t>(n));
    std::iota(piv.begin(), piv.end(), 0);

    for (int k = 0; k < n; ++k) {
        int p = k;
        for (int i = k + 1; i < n; ++i)
            if (std::fabs(lu(i, k)) > std::fabs(lu(p, k))) p = i;
        if (std::fabs(lu(p, k)) < 1e-300)
            throw std::invalid_argument("lu_solve: singular matrix");
        if (p != k) {
            for (int j = 0; j < n; ++j) std::swap(lu(k, j), lu(p, j));
            for (int j = 0; j < m; ++j) std::swap(x(k, j), x(p, j));
        }
        for (int i = k + 1; i < n; ++i) {
            const double f = lu(i, k) / lu(k, k);
            lu(i, k) = f;
            for (int j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
            for (int j = 0; j < m; ++j) x(i, j) -= f * x(k, j);
        }
    }
    for (int k = n - 1; k >= 0; --k) {
        for (int j = 0; j < m; ++j) {
            double s = x(k, j);
            for (int i = k + 1; i < n; ++i) s -= lu(k, i) * x(i, j);
            x(k, j) = s / lu(k, k);
        }
    }
    return x;
}

Tensor cholesky(const Tensor& a)
{
    if (a.rows() != a.cols())
        throw std::invalid_argument("cholesky: matrix must be square");
    const int n = a.rows();
    Tensor l(n, n);
    for (int j = 0; j < n; ++j) {
        double d = a(j, j);
        for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0))
            throw std::invalid_argument("cholesky: matrix is not positive definite");
        l(j, j) = std::sqrt(d);
        for (int i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

Tensor solve_lower_triangular(const Tensor& l, const Tensor& b)
{
    const int n = l.rows(), m = b.cols();
    if (l.rows() != l.cols() || b.rows() != n)
        throw std::invalid_argument("solve_lower_triangular: size mismatch");
    Tensor x = b;
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < n; ++i) {
            double s = x(i, j);
            for (int k = 0; k < i; ++k) s -= l(i, k) * x(k, j);
            if (std::fabs(l(i, i)) < 1e-300)
                throw std::invalid_argument("solve_lower_triangular: singular");
            x(i, j) = s / l(i, i);
        }
    }
    return x;
}

Tensor solve_upper_triangular(const Tensor& u, const Tensor& b)
{
    const int n = u.rows(), m = b.cols();
    if (u.rows() != u.cols() || b.rows() != n)
        throw std::invalid_argument("solve_upper_triangular: size mismatch");
    Tensor x = b;
    for (int j = 0; j < m; ++j) {
        for (int i = n - 1; i >= 0; --i) {
            double s = x(i, j);
            for (int k = i + 1; k < n; ++k) s -= u(i, k) * x(k, j);
            if (std::fabs(u(i, i)) < 1e-300)
                throw std::invalid_argument("solve_upper_triangular: singular");
            x(i, j) = s / u(i, i);
        }
    }
    return x;
}

std::vector<double> principal_angles(const Tensor& a, const Tensor& b)
{
    Tensor qa = orthonormalize_columns(a);
    Tensor qb = orthonormalize_columns(b);
    SvdResult s = jacobi_svd(matmul(transposed(qa), qb));
    std::vector<double> angles;
    angles.reserve(s.sigma.size());
    for (double c : s.sigma) angles.push_back(std::acos(std::clamp(c, -1.0, 1.0)));
    std::sort(angles.begin(), angles.end());
    return angles;
}

}  // namespace mtnet
