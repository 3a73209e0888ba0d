#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace smet {

/// Dense row-major matrix of doubles. Vectors are 1×n matrices.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    void zero() { std::fill(data.begin(), data.end(), 0.0); }
    bool operator==(const Matrix&) const = default;
};

// out(n×m) = a(n×k) · b(k×m)
Matrix matmul(const Matrix& a, const Matrix& b);
// out(n×m) = a(n×k) · b(m×k)ᵀ
Matrix matmul_bt(const Matrix& a, const Matrix& b);
// acc(k×m) += a(n×k)ᵀ · b(n×m)
void add_matmul_at(Matrix& acc, const Matrix& a, const Matrix& b);
// Adds `bias` (1×m) to every row of `m`.
void add_row_bias(Matrix& m, const Matrix& bias);
// acc(1×m) += column sums of g(n×m)
void add_column_sums(Matrix& acc, const Matrix& g);

double gelu(double x);
double gelu_grad(double x);
double sigmoid(double x);

}  // namespace smet
