#pragma once

#include <stdexcept>
#include <vector>

#include "florist/matrix.hpp"

namespace florist {

class svd_convergence_error : public std::runtime_error {
public:
    svd_convergence_error(const std::string& what, int sweeps)
        : std::runtime_error(what), sweeps(sweeps) {}
    int sweeps;
};

/// Thin SVD triple M = u * diag(s) * vt with q = min(rows, cols).
/// s is non-increasing and non-negative; u has orthonormal columns,
/// vt orthonormal rows. Signs are canonical: the largest-magnitude
/// component of each u column is non-negative.
struct SvdFactors {
    Matrix u;                // d1 x q
    std::vector<double> s;   // length q
    Matrix vt;               // q x d2

    Matrix reconstruct() const;
};

/// One-sided Jacobi thin SVD. Deterministic for a given input on a given
/// machine. Throws svd_convergence_error if the sweep bound is exceeded.
SvdFactors thin_svd(const Matrix& m);

}  // namespace florist
