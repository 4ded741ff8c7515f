#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

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

// Oracle: singular values as square roots of eigenvalues of M^T M,
// computed with a classical two-sided Jacobi eigensolver.
std::vector<double> singular_values_via_eig(const Matrix& m) {
    const Matrix mtm = matmul(transpose(m), m);
    const std::size_t n = mtm.rows();
    Matrix a = mtm;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = std::copysign(1.0, theta) /
                                 (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
            }
        }
    }
    std::vector<double> vals(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = std::sqrt(std::max(0.0, a(i, i)));
    std::sort(vals.rbegin(), vals.rend());
    return vals;
}

double orthonormality_defect(const Matrix& q_cols) {
    const Matrix g = matmul(transpose(q_cols), q_cols);
    Matrix diff = g;
    for (std::size_t i = 0; i < g.rows(); ++i) diff(i, i) -= 1.0;
    return frobenius_norm(diff);
}

void check_factors(const Matrix& m, const SvdFactors& f) {
    const std::size_t q = std::min(m.rows(), m.cols());
    REQUIRE(f.s.size() == q);
    for (std::size_t i = 0; i + 1 < q; ++i) CHECK(f.s[i] >= f.s[i + 1]);
    for (double v : f.s) CHECK(v >= 0.0);
    CHECK(orthonormality_defect(f.u) <= 1e-9 * q);
    CHECK(orthonormality_defect(transpose(f.vt)) <= 1e-9 * q);
    const double err = frobenius_norm(subtract(f.reconstruct(), m));
    CHECK(err <= 1e-8 * (1.0 + frobenius_norm(m)));
}

}  // namespace

TEST_CASE("diagonal matrix") {
    Matrix m(3, 3);
    m(0, 0) = 3;
    m(1, 1) = 2;
    m(2, 2) = 1;
    const SvdFactors f = thin_svd(m);
    CHECK(f.s[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(f.s[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(f.s[2] == doctest::Approx(1.0).epsilon(1e-12));
    check_factors(m, f);
}

TEST_CASE("rank-1 outer product") {
    // u with norm 2, v with norm 3
    const Matrix u(4, 1, {2, 0, 0, 0});
    const Matrix v(1, 3, {0, 3, 0});
    const Matrix m = matmul(u, v);
    const SvdFactors f = thin_svd(m);
    CHECK(f.s[0] == doctest::Approx(6.0).epsilon(1e-12));
    for (std::size_t i = 1; i < f.s.size(); ++i) CHECK(f.s[i] == 0.0);
    check_factors(m, f);
}

TEST_CASE("random tall matrix vs eigendecomposition oracle") {
    const Matrix m = random_matrix(6, 4, 21);
    const SvdFactors f = thin_svd(m);
    check_factors(m, f);

    const std::vector<double> oracle = singular_values_via_eig(m);
    for (std::size_t i = 0; i < oracle.size(); ++i)
        CHECK(f.s[i] == doctest::Approx(oracle[i]).epsilon(1e-8));
}

TEST_CASE("wide matrix") {
    const Matrix m = random_matrix(4, 9, 23);
    const SvdFactors f = thin_svd(m);
    check_factors(m, f);
    const std::vector<double> oracle = singular_values_via_eig(m);
    for (std::size_t i = 0; i < f.s.size(); ++i)
        CHECK(f.s[i] == doctest::Approx(oracle[i]).epsilon(1e-8));
}

TEST_CASE("zero matrix yields orthonormal factors") {
    const Matrix m(5, 3);
    const SvdFactors f = thin_svd(m);
    for (double v : f.s) CHECK(v == 0.0);
    check_factors(m, f);
}

TEST_CASE("round-trip property over random shapes") {
    std::mt19937_64 shape_rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t rows = 1 + shape_rng() % 20;
        const std::size_t cols = 1 + shape_rng() % 20;
        const Matrix m = random_matrix(rows, cols, 1000 + trial);
        check_factors(m, thin_svd(m));
    }
}

TEST_CASE("singular values invariant under permutation") {
    const Matrix m = random_matrix(7, 5, 31);
    Matrix permuted(7, 5);
    const std::size_t row_perm[7] = {3, 0, 6, 1, 5, 2, 4};
    const std::size_t col_perm[5] = {4, 2, 0, 3, 1};
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 5; ++j) permuted(i, j) = m(row_perm[i], col_perm[j]);

    const SvdFactors f1 = thin_svd(m);
    const SvdFactors f2 = thin_svd(permuted);
    for (std::size_t i = 0; i < f1.s.size(); ++i)
        CHECK(f1.s[i] == doctest::Approx(f2.s[i]).epsilon(1e-9));
}

TEST_CASE("transpose has identical singular values") {
    const Matrix m = random_matrix(8, 5, 37);
    const SvdFactors f1 = thin_svd(m);
    const SvdFactors f2 = thin_svd(transpose(m));
    for (std::size_t i = 0; i < f1.s.size(); ++i)
        CHECK(f1.s[i] == doctest::Approx(f2.s[i]).epsilon(1e-9));
}

TEST_CASE("deterministic across repeated calls") {
    const Matrix m = random_matrix(9, 6, 41);
    const SvdFactors f1 = thin_svd(m);
    const SvdFactors f2 = thin_svd(m);
    for (std::size_t i = 0; i < f1.u.size(); ++i) CHECK(f1.u.data()[i] == f2.u.data()[i]);
    for (std::size_t i = 0; i < f1.vt.size(); ++i) CHECK(f1.vt.data()[i] == f2.vt.data()[i]);
}

TEST_CASE("sign convention: largest u component non-negative") {
    const Matrix m = random_matrix(10, 4, 43);
    const SvdFactors f = thin_svd(m);
    for (std::size_t j = 0; j < f.u.cols(); ++j) {
        double best = 0.0;
        for (std::size_t i = 0; i < f.u.rows(); ++i)
            if (std::abs(f.u(i, j)) > std::abs(best)) best = f.u(i, j);
        CHECK(best >= 0.0);
    }
}

TEST_CASE("empty matrix rejected") {
    CHECK_THROWS_AS(thin_svd(Matrix(0, 3)), dimension_error);
}
