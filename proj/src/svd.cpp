#include "florist/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace florist {

Matrix SvdFactors::reconstruct() const {
    Matrix us = u;
    for (std::size_t j = 0; j < s.size(); ++j)
        for (std::size_t i = 0; i < us.rows(); ++i) us(i, j) *= s[j];
    return matmul(us, vt);
}

namespace {

constexpr int kMaxSweeps = 60;
constexpr double kRotationTol = 1e-14;
// Singular values below kRankCutoff * s_max are treated as exact zeros.
constexpr double kRankCutoff = 1e-12;
// Columns whose norm falls below kColumnDropTol * ||M||_F are excluded
// from pair rotations: they end up as zero singular values regardless,
// and rotating two such (often exactly parallel) noise columns against
// each other never reduces their correlation.
constexpr double kColumnDropTol = 1e-14;

// One-sided Jacobi on a tall (or square) matrix, rows >= cols.
// Orthogonalizes the columns of a working copy of M while accumulating
// the rotations into V; on exit column j of the work buffer is s_j * u_j.
struct JacobiResult {
    std::vector<double> work;  // column-major, rows x cols
    std::vector<double> v;     // column-major, cols x cols
};

JacobiResult jacobi_sweeps(const Matrix& m) {
    const std::size_t rows = m.rows(), cols = m.cols();
    JacobiResult r;
    r.work.resize(rows * cols);
    for (std::size_t j = 0; j < cols; ++j)
        for (std::size_t i = 0; i < rows; ++i) r.work[j * rows + i] = m(i, j);
    r.v.assign(cols * cols, 0.0);
    for (std::size_t j = 0; j < cols; ++j) r.v[j * cols + j] = 1.0;

    double fnorm_sq = 0.0;
    for (double v : r.work) fnorm_sq += v * v;
    const double drop_sq = kColumnDropTol * kColumnDropTol * fnorm_sq;

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < cols; ++p) {
            for (std::size_t q = p + 1; q < cols; ++q) {
                double* cp = r.work.data() + p * rows;
                double* cq = r.work.data() + q * rows;
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < rows; ++i) {
                    alpha += cp[i] * cp[i];
                    beta += cq[i] * cq[i];
                    gamma += cp[i] * cq[i];
                }
                if (alpha <= drop_sq || beta <= drop_sq) continue;
                const double scale = std::sqrt(alpha * beta);
                if (std::abs(gamma) <= kRotationTol * scale) continue;

                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < rows; ++i) {
                    const double wp = cp[i], wq = cq[i];
                    cp[i] = c * wp - s * wq;
                    cq[i] = s * wp + c * wq;
                }
                double* vp = r.v.data() + p * cols;
                double* vq = r.v.data() + q * cols;
                for (std::size_t i = 0; i < cols; ++i) {
                    const double wp = vp[i], wq = vq[i];
                    vp[i] = c * wp - s * wq;
                    vq[i] = s * wp + c * wq;
                }
                rotated = true;
            }
        }
        if (!rotated) return r;
    }
    throw svd_convergence_error("thin_svd: Jacobi sweeps did not converge", kMaxSweeps);
}

// Replace u columns with zero singular value by vectors orthonormal to
// the rest, so u always has exactly q orthonormal columns.
void complete_null_columns(Matrix& u, const std::vector<bool>& is_null) {
    const std::size_t rows = u.rows(), q = u.cols();
    for (std::size_t j = 0; j < q; ++j) {
        if (!is_null[j]) continue;
        for (std::size_t cand = 0; cand < rows; ++cand) {
            std::vector<double> e(rows, 0.0);
            e[cand] = 1.0;
            for (std::size_t k = 0; k < q; ++k) {
                if (k != j && is_null[k] && k > j) continue;  // not yet filled
                if (k == j) continue;
                double dot = 0.0;
                for (std::size_t i = 0; i < rows; ++i) dot += e[i] * u(i, k);
                for (std::size_t i = 0; i < rows; ++i) e[i] -= dot * u(i, k);
            }
            double norm = 0.0;
            for (double v : e) norm += v * v;
            norm = std::sqrt(norm);
            if (norm > 0.5) {
                for (std::size_t i = 0; i < rows; ++i) u(i, j) = e[i] / norm;
                break;
            }
        }
    }
}

SvdFactors thin_svd_tall(const Matrix& m) {
    const std::size_t rows = m.rows(), cols = m.cols();
    JacobiResult jr = jacobi_sweeps(m);

    std::vector<double> norms(cols);
    for (std::size_t j = 0; j < cols; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
            const double v = jr.work[j * rows + i];
            sum += v * v;
        }
        norms[j] = std::sqrt(sum);
    }
    const double smax = *std::max_element(norms.begin(), norms.end());

    std::vector<std::size_t> order(cols);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });

    SvdFactors f;
    f.u = Matrix(rows, cols);
    f.s.resize(cols);
    f.vt = Matrix(cols, cols);
    std::vector<bool> is_null(cols, false);
    for (std::size_t j = 0; j < cols; ++j) {
        const std::size_t src = order[j];
        const double sv = norms[src];
        if (sv <= kRankCutoff * smax || sv == 0.0) {
            f.s[j] = 0.0;
            is_null[j] = true;
        } else {
            f.s[j] = sv;
            for (std::size_t i = 0; i < rows; ++i) f.u(i, j) = jr.work[src * rows + i] / sv;
        }
        for (std::size_t i = 0; i < cols; ++i) f.vt(j, i) = jr.v[src * cols + i];
    }
    complete_null_columns(f.u, is_null);
    return f;
}

void canonicalize_signs(SvdFactors& f) {
    for (std::size_t j = 0; j < f.u.cols(); ++j) {
        std::size_t imax = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < f.u.rows(); ++i) {
            const double a = std::abs(f.u(i, j));
            if (a > best) {
                best = a;
                imax = i;
            }
        }
        if (f.u(imax, j) < 0.0) {
            for (std::size_t i = 0; i < f.u.rows(); ++i) f.u(i, j) = -f.u(i, j);
            for (std::size_t i = 0; i < f.vt.cols(); ++i) f.vt(j, i) = -f.vt(j, i);
        }
    }
}

}  // namespace

SvdFactors thin_svd(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) throw dimension_error("thin_svd: empty matrix");
    m.check_finite("thin_svd input");

    SvdFactors f;
    if (m.rows() >= m.cols()) {
        f = thin_svd_tall(m);
    } else {
        // M = (M^T)^T: decompose the tall transpose and swap factors.
        SvdFactors t = thin_svd_tall(transpose(m));
        f.u = transpose(t.vt);
        f.s = std::move(t.s);
        f.vt = transpose(t.u);
    }
    canonicalize_signs(f);
    f.u.check_finite("thin_svd u");
    f.vt.check_finite("thin_svd vt");
    return f;
}

}  // namespace florist
