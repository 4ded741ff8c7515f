#include "florist/matrix.hpp"

#include <atomic>
#include <cmath>

namespace florist {

namespace alloc_stats {
namespace {
std::atomic<std::size_t> g_largest_block{0};
}

void reset() { g_largest_block.store(0, std::memory_order_relaxed); }

std::size_t largest_block() { return g_largest_block.load(std::memory_order_relaxed); }

void record(std::size_t elements) {
    std::size_t prev = g_largest_block.load(std::memory_order_relaxed);
    while (elements > prev &&
           !g_largest_block.compare_exchange_weak(prev, elements, std::memory_order_relaxed)) {
    }
}
}  // namespace alloc_stats

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
    alloc_stats::record(rows * cols);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw dimension_error("Matrix: data length " + std::to_string(data_.size()) +
                              " does not match " + std::to_string(rows) + "x" +
                              std::to_string(cols));
    }
    alloc_stats::record(rows * cols);
    check_finite("Matrix construction");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

void Matrix::check_finite(const char* context) const {
    for (double v : data_) {
        if (!std::isfinite(v)) {
            throw std::domain_error(std::string(context) + ": non-finite entry");
        }
    }
}

namespace {
void require_product_shapes(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw dimension_error("matmul: " + std::to_string(a.rows()) + "x" +
                              std::to_string(a.cols()) + " * " + std::to_string(b.rows()) + "x" +
                              std::to_string(b.cols()));
    }
}
}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    require_product_shapes(a, b);
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Matrix c(m, n);
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = c.data().data();

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
        double* crow = pc + i * n;
        const double* arow = pa + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            const double* brow = pb + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    c.check_finite("matmul");
    return c;
}

Matrix matmul_serial(const Matrix& a, const Matrix& b) {
    require_product_shapes(a, b);
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Matrix c(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = a(i, kk);
            for (std::size_t j = 0; j < n; ++j) c(i, j) += aik * b(kk, j);
        }
    }
    c.check_finite("matmul_serial");
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw dimension_error("add: shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
    return c;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw dimension_error("subtract: shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
    return c;
}

Matrix scale(const Matrix& m, double factor) {
    Matrix c = m;
    for (double& v : c.data()) v *= factor;
    return c;
}

void axpy(Matrix& dst, double factor, const Matrix& src) {
    if (!dst.same_shape(src)) throw dimension_error("axpy: shape mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += factor * src.data()[i];
}

double frobenius_norm(const Matrix& m) {
    double sum = 0.0;
    for (double v : m.data()) sum += v * v;
    return std::sqrt(sum);
}

}  // namespace florist
