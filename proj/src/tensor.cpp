#include "mtnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace mtnet {

Tensor::Tensor(int rows, int cols)
    : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, 0.0)
{
    if (rows < 0 || cols < 0) throw std::invalid_argument("Tensor: negative dimension");
}

Tensor::Tensor(int rows, int cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values))
{
    if (rows < 0 || cols < 0) throw std::invalid_argument("Tensor: negative dimension");
    if (data_.size() != static_cast<size_t>(rows) * cols)
        throw std::invalid_argument("Tensor: data length does not match " + shape_str());
}

Tensor Tensor::scalar(double v) { return Tensor(1, 1, {v}); }

Tensor Tensor::zeros(int rows, int cols) { return Tensor(rows, cols); }

Tensor Tensor::ones(int rows, int cols) { return full(rows, cols, 1.0); }

Tensor Tensor::full(int rows, int cols, double v)
{
    Tensor t(rows, cols);
    for (auto& x : t.data_) x = v;
    return t;
}

Tensor Tensor::identity(int n)
{
    Tensor t(n, n);
    for (int i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

Tensor Tensor::column(std::initializer_list<double> values)
{
    Tensor t(static_cast<int>(values.size()), 1);
    int i = 0;
    for (double v : values) t(i++, 0) = v;
    return t;
}

Tensor Tensor::of(std::initializer_list<std::initializer_list<double>> rows)
{
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    Tensor t(r, c);
    int i = 0;
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != c)
            throw std::invalid_argument("Tensor::of: ragged rows");
        int j = 0;
        for (double v : row) t(i, j++) = v;
        ++i;
    }
    return t;
}

bool Tensor::all_finite() const
{
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::max_abs() const
{
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
}

std::string Tensor::shape_str() const
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%dx%d", rows_, cols_);
    return buf;
}

Tensor matmul(const Tensor& a, const Tensor& b)
{
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: incompatible shapes " + a.shape_str() + " * " +
                                    b.shape_str());
    Tensor c(a.rows(), b.cols());
    const int n = a.rows(), k = a.cols(), m = b.cols();
    const double* bd = b.data().data();
    for (int i = 0; i < n; ++i) {
        double* ci = c.data().data() + static_cast<size_t>(i) * m;
        for (int p = 0; p < k; ++p) {
            const double aip = a(i, p);
            if (aip == 0.0) continue;  // keeps identity factors bitwise transparent
            const double* bp = bd + static_cast<size_t>(p) * m;
            for (int j = 0; j < m; ++j) ci[j] += aip * bp[j];
        }
    }
    return c;
}

Tensor transposed(const Tensor& a)
{
    Tensor t(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Tensor hadamard(const Tensor& a, const Tensor& b)
{
    if (!a.same_shape(b))
        throw std::invalid_argument("hadamard: shape mismatch " + a.shape_str() + " vs " +
                                    b.shape_str());
    Tensor c = a;
    for (size_t i = 0; i < c.data().size(); ++i) c.data()[i] *= b.data()[i];
    return c;
}

Tensor operator+(const Tensor& a, const Tensor& b)
{
    if (!a.same_shape(b))
        throw std::invalid_argument("add: shape mismatch " + a.shape_str() + " vs " +
                                    b.shape_str());
    Tensor c = a;
    for (size_t i = 0; i < c.data().size(); ++i) c.data()[i] += b.data()[i];
    return c;
}

Tensor operator-(const Tensor& a, const Tensor& b)
{
    if (!a.same_shape(b))
        throw std::invalid_argument("subtract: shape mismatch " + a.shape_str() + " vs " +
                                    b.shape_str());
    Tensor c = a;
    for (size_t i = 0; i < c.data().size(); ++i) c.data()[i] -= b.data()[i];
    return c;
}

Tensor operator*(double s, const Tensor& a)
{
    Tensor c = a;
    for (auto& v : c.data()) v *= s;
    return c;
}

double dot_flat(const Tensor& a, const Tensor& b)
{
    if (!a.same_shape(b)) throw std::invalid_argument("dot_flat: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.data().size(); ++i) s += a.data()[i] * b.data()[i];
    return s;
}

double frobenius_norm(const Tensor& a) { return std::sqrt(dot_flat(a, a)); }

double max_abs_diff(const Tensor& a, const Tensor& b)
{
    if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.data().size(); ++i)
        m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
    return m;
}

bool bit_equal(const Tensor& a, const Tensor& b)
{
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0;
}

double stable_sigmoid(double x)
{
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace mtnet
