#include "smet/matrix.hpp"

#include <cmath>
#include <numbers>

#include "smet/error.hpp"

namespace smet {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw ShapeError("matmul: inner dimensions differ");
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* o = out.data.data() + i * out.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double s = a(i, k);
            if (s == 0.0) continue;
            const double* br = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) o[j] += s * br[j];
        }
    }
    return out;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) throw ShapeError("matmul_bt: inner dimensions differ");
    Matrix out(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ar = a.data.data() + i * a.cols;
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* br = b.data.data() + j * b.cols;
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += ar[k] * br[k];
            out(i, j) = s;
        }
    }
    return out;
}

void add_matmul_at(Matrix& acc, const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || acc.rows != a.cols || acc.cols != b.cols)
        throw ShapeError("add_matmul_at: shape mismatch");
    for (std::size_t n = 0; n < a.rows; ++n) {
        const double* br = b.data.data() + n * b.cols;
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double s = a(n, i);
            if (s == 0.0) continue;
            double* o = acc.data.data() + i * acc.cols;
            for (std::size_t j = 0; j < b.cols; ++j) o[j] += s * br[j];
        }
    }
}

void add_row_bias(Matrix& m, const Matrix& bias) {
    if (bias.size() != m.cols) throw ShapeError("add_row_bias: width mismatch");
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) m(i, j) += bias.data[j];
}

void add_column_sums(Matrix& acc, const Matrix& g) {
    if (acc.size() != g.cols) throw ShapeError("add_column_sums: width mismatch");
    for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) acc.data[j] += g(i, j);
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace smet
