// Compares the OpenMP matmul kernel against the serial reference and
// times the thin SVD on representative aggregation shapes.

#include <chrono>
#include <cstdio>
#include <random>

#include <omp.h>

#include "florist/matrix.hpp"
#include "florist/svd.hpp"

using namespace florist;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = dist(rng);
    return m;
}

template <typename F>
double time_ms(F&& fn, int reps) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main() {
    std::printf("threads: %d\n", omp_get_max_threads());

    for (std::size_t dim : {128ul, 256ul, 512ul, 1024ul}) {
        const Matrix a = random_matrix(dim, dim, 1);
        const Matrix b = random_matrix(dim, dim, 2);
        const int reps = dim <= 256 ? 20 : 5;
        const double serial = time_ms([&] { (void)matmul_serial(a, b); }, reps);
        const double parallel = time_ms([&] { (void)matmul(a, b); }, reps);
        const Matrix diff = subtract(matmul(a, b), matmul_serial(a, b));
        std::printf("matmul %4zux%-4zu  serial %8.2f ms  omp %8.2f ms  speedup %5.2fx  "
                    "max_diff %g\n",
                    dim, dim, serial, parallel, serial / parallel, frobenius_norm(diff));
    }

    // stacked-adapter shapes: tall-thin and wide-short
    for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{512, 64},
                              {64, 512},
                              {152, 152}}) {
        const Matrix m = random_matrix(rows, cols, 3);
        const double ms = time_ms([&] { (void)thin_svd(m); }, 5);
        std::printf("thin_svd %4zux%-4zu  %8.2f ms\n", rows, cols, ms);
    }
    return 0;
}
