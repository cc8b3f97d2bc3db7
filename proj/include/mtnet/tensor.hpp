#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace mtnet {

// Dense row-major matrix of doubles. Vectors are n x 1 columns, scalars 1 x 1.
class Tensor {
public:
    Tensor() = default;
    Tensor(int rows, int cols);  // zero-filled
    Tensor(int rows, int cols, std::vector<double> values);

    static Tensor scalar(double v);
    static Tensor zeros(int rows, int cols);
    static Tensor ones(int rows, int cols);
    static Tensor full(int rows, int cols, double v);
    static Tensor identity(int n);
    static Tensor column(std::initializer_list<double> values);
    static Tensor of(std::initializer_list<std::initializer_list<double>> rows);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    long long size() const { return static_cast<long long>(rows_) * cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool same_shape(const Tensor& other) const
    {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool all_finite() const;
    double max_abs() const;
    std::string shape_str() const;  // "3x4"

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transposed(const Tensor& a);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);

double dot_flat(const Tensor& a, const Tensor& b);
double frobenius_norm(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool bit_equal(const Tensor& a, const Tensor& b);

double stable_sigmoid(double x);

}  // namespace mtnet
