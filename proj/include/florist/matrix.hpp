#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace florist {

class dimension_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major float64 matrix. Entries are required to be finite;
/// kernels validate their outputs.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    void check_finite(const char* context) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Largest single matrix allocation (in elements) since the last reset.
// Used by tests to verify aggregation never materializes an m x n buffer.
namespace alloc_stats {
void reset();
std::size_t largest_block();
}

/// OpenMP-parallel product; each output entry is accumulated in a fixed
/// k-order by exactly one thread, so results are identical for any
/// thread count.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Serial triple-loop reference, kept for testing and benchmarking.
Matrix matmul_serial(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double factor);
void axpy(Matrix& dst, double factor, const Matrix& src);

double frobenius_norm(const Matrix& m);

}  // namespace florist
