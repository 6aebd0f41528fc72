#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "lca/error.hpp"
#include "lca/matrix.hpp"

namespace lca {

// Modified Gram-Schmidt with one re-orthogonalization pass. Two passes are
// enough to push || Q^T Q - I ||_F to machine precision for the dense,
// well-scaled frames this library works with (<= a few hundred columns).
inline Matrix qr_orthonormalize(const Matrix& m) {
    const std::size_t rows = m.rows(), cols = m.cols();
    if (cols == 0 || rows < cols)
        throw ShapeMismatch("qr_orthonormalize expects a tall matrix (rows >= cols >= 1)");
    Matrix q = m;
    std::vector<double> col(rows);
    for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t r = 0; r < rows; ++r) col[r] = q(r, j);
        double initial = 0.0;
        for (double v : col) initial += v * v;
        initial = std::sqrt(initial);
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t i = 0; i < j; ++i) {
                double dot = 0.0;
                for (std::size_t r = 0; r < rows; ++r) dot += q(r, i) * col[r];
                for (std::size_t r = 0; r < rows; ++r) col[r] -= dot * q(r, i);
            }
        }
        double norm = 0.0;
        for (double v : col) norm += v * v;
        norm = std::sqrt(norm);
        if (norm <= 1e-13 * std::max(1.0, initial))
            throw RankDeficient("qr_orthonormalize: dependent columns");
        for (std::size_t r = 0; r < rows; ++r) q(r, j) = col[r] / norm;
    }
    return q;
}

struct EigenDecomposition {
    std::vector<double> values; // descending
    Matrix vectors;             // columns, same order as values
};

namespace detail {

inline double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

} // namespace detail

// Symmetric eigendecomposition by cyclic Jacobi sweeps. Intended for the
// small dense matrices in this library (n <= a few hundred); accuracy is at
// machine-precision level, well inside the 1e-9 residual contract.
inline EigenDecomposition sym_eig(const Matrix& s) {
    if (s.rows() != s.cols())
        throw ShapeMismatch("sym_eig expects a square matrix");
    const std::size_t n = s.rows();
    const double scale = s.frobenius_norm();
    {
        double asym = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double d = s(i, j) - s(j, i);
                asym += 2.0 * d * d;
            }
        if (std::sqrt(asym) > 1e-9 * std::max(scale, 1e-300))
            throw NotSymmetric("sym_eig: input is not symmetric");
    }

    Matrix a = s;
    // symmetrize exactly so rotations preserve symmetry bit-for-bit
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = v;
            a(j, i) = v;
        }
    Matrix v = Matrix::identity(n);

    const double stop = 1e-15 * std::max(scale, 1e-300);
    bool converged = false;
    for (int sweep = 0; sweep < 64; ++sweep) {
        if (detail::off_diagonal_norm(a) <= stop) {
            converged = true;
            break;
        }
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::fabs(apq) <= 1e-300) continue;
                const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = t * c;
                for (std::size_t r = 0; r < n; ++r) {
                    const double arp = a(r, p), arq = a(r, q);
                    a(r, p) = c * arp - sn * arq;
                    a(r, q) = sn * arp + c * arq;
                }
                for (std::size_t col = 0; col < n; ++col) {
                    const double apc = a(p, col), aqc = a(q, col);
                    a(p, col) = c * apc - sn * aqc;
                    a(q, col) = sn * apc + c * aqc;
                }
                for (std::size_t r = 0; r < n; ++r) {
                    const double vrp = v(r, p), vrq = v(r, q);
                    v(r, p) = c * vrp - sn * vrq;
                    v(r, q) = sn * vrp + c * vrq;
                }
            }
        }
    }
    if (!converged && detail::off_diagonal_norm(a) > 1e-9 * std::max(scale, 1e-300))
        throw NumericFailure("sym_eig: Jacobi sweeps did not converge");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    EigenDecomposition out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = a(order[j], order[j]);
        for (std::size_t r = 0; r < n; ++r) out.vectors(r, j) = v(r, order[j]);
    }
    return out;
}

// Inverse matrix square root of a symmetric positive definite matrix,
// M = V diag(1/sqrt(lambda)) V^T. Identity input returns identity exactly.
inline Matrix inv_sqrt_psd(const Matrix& s) {
    const EigenDecomposition eig = sym_eig(s);
    const std::size_t n = s.rows();
    for (double lam : eig.values)
        if (lam < 1e-12)
            throw NotPSD("inv_sqrt_psd: eigenvalue below 1e-12");
    Matrix scaled = eig.vectors; // V diag(1/sqrt(lambda))
    for (std::size_t j = 0; j < n; ++j) {
        const double f = 1.0 / std::sqrt(eig.values[j]);
        for (std::size_t r = 0; r < n; ++r) scaled(r, j) *= f;
    }
    return scaled * eig.vectors.transpose();
}

// Largest singular value via the eigendecomposition of the smaller Gram
// matrix (m^T m or m m^T, whichever is smaller; the nonzero spectra agree).
inline double spectral_norm(const Matrix& m) {
    if (m.size() == 0) throw ShapeMismatch("spectral_norm of empty matrix");
    Matrix gram;
    if (m.rows() <= m.cols()) {
        gram = multiply_transposed(m, m);
    } else {
        const Matrix t = m.transpose();
        gram = multiply_transposed(t, t);
    }
    const EigenDecomposition eig = sym_eig(gram);
    return std::sqrt(std::max(eig.values.front(), 0.0));
}

} // namespace lca
