#pragma once

// Dense complex linear algebra used by every solver path. LU and the general
// eigensolver are backed by Eigen; this header pins the accuracy contracts.

#include "euvwg/core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <sstream>
#include <vector>

namespace euvwg {

/// Square root with Im <= 0, ties (Im == 0) resolved to Re >= 0.
inline cplx branch_sqrt(cplx v) {
    cplx s = std::sqrt(v);
    if (s.imag() > 0.0) s = -s;
    if (s.imag() == 0.0 && s.real() < 0.0) s = -s;
    return s;
}

/// Table of 2D Fourier coefficients c(m, n) for |m| <= max_m, |n| <= max_n.
struct FourierArray {
    int max_m = 0;
    int max_n = 0;
    std::vector<cplx> data;

    FourierArray() = default;
    FourierArray(int mm, int mn) : max_m(mm), max_n(mn), data(std::size_t(2 * mm + 1) * (2 * mn + 1)) {}

    [[nodiscard]] bool contains(int m, int n) const { return std::abs(m) <= max_m && std::abs(n) <= max_n; }
    [[nodiscard]] std::size_t offset(int m, int n) const {
        return std::size_t(n + max_n) * (2 * max_m + 1) + std::size_t(m + max_m);
    }
    cplx& operator()(int m, int n) { return data[offset(m, n)]; }
    [[nodiscard]] cplx operator()(int m, int n) const { return data[offset(m, n)]; }
    [[nodiscard]] cplx at(int m, int n) const { return contains(m, n) ? data[offset(m, n)] : cplx{}; }
};

/// Flat harmonic ordering shared by every Fourier-space vector: m runs fastest.
inline int harmonic_index(int m, int n, int nx, int ny) { return (n + ny) * (2 * nx + 1) + (m + nx); }

/// Fourier-space multiplication operator T[(m,n),(m',n')] = c(m-m', n-n').
inline CMatrix toeplitz_from_coeffs(const FourierArray& c, int nx, int ny) {
    if (c.max_m < 2 * nx || c.max_n < 2 * ny) {
        std::ostringstream os;
        os << "toeplitz_from_coeffs: coefficient range (" << c.max_m << ',' << c.max_n
           << ") does not cover index differences (" << 2 * nx << ',' << 2 * ny << ')';
        throw std::invalid_argument(os.str());
    }
    const int n_harm = (2 * nx + 1) * (2 * ny + 1);
    CMatrix t(n_harm, n_harm);
    for (int n = -ny; n <= ny; ++n)
        for (int m = -nx; m <= nx; ++m) {
            const int row = harmonic_index(m, n, nx, ny);
            for (int n2 = -ny; n2 <= ny; ++n2)
                for (int m2 = -nx; m2 <= nx; ++m2) t(row, harmonic_index(m2, n2, nx, ny)) = c(m - m2, n - n2);
        }
    return t;
}

struct LuSolveResult {
    CVector x;
    double relative_residual = 0.0;
    double min_pivot = 0.0;
};

/// Partial-pivoting LU solve with up to two refinement sweeps. Throws when the
/// smallest pivot falls below working precision relative to the largest.
inline LuSolveResult lu_solve_report(const CMatrix& m, const CVector& r) {
    if (m.rows() != m.cols()) throw std::invalid_argument("lu_solve: matrix is not square");
    if (m.rows() != r.size()) throw std::invalid_argument("lu_solve: right-hand side size mismatch");
    require_finite(m, "lu_solve matrix");
    require_finite(r, "lu_solve right-hand side");

    Eigen::PartialPivLU<CMatrix> lu(m);
    const auto& packed = lu.matrixLU();
    double pmin = std::numeric_limits<double>::infinity();
    double pmax = 0.0;
    for (Eigen::Index i = 0; i < packed.rows(); ++i) {
        const double p = std::abs(packed(i, i));
        pmin = std::min(pmin, p);
        pmax = std::max(pmax, p);
    }
    const double eps = std::numeric_limits<double>::epsilon();
    if (m.rows() > 0 && (!(pmin > double(m.rows()) * eps * pmax) || pmax == 0.0)) {
        std::ostringstream os;
        os << "lu_solve: matrix is singular to working precision (min pivot " << pmin << ", max pivot " << pmax
           << ')';
        throw NumericalError(os.str());
    }

    LuSolveResult out;
    out.min_pivot = pmin;
    out.x = lu.solve(r);
    const double rnorm = r.norm();
    auto residual = [&] { return rnorm == 0.0 ? (m * out.x).norm() : (m * out.x - r).norm() / rnorm; };
    out.relative_residual = residual();
    for (int sweep = 0; sweep < 2 && out.relative_residual > 4.0 * eps; ++sweep) {
        CVector candidate = out.x + lu.solve(r - m * out.x);
        const double before = out.relative_residual;
        std::swap(out.x, candidate);
        out.relative_residual = residual();
        if (out.relative_residual >= before) {
            std::swap(out.x, candidate);
            out.relative_residual = before;
            break;
        }
    }
    require_finite(out.x, "lu_solve solution");
    return out;
}

inline CVector lu_solve(const CMatrix& m, const CVector& r) { return lu_solve_report(m, r).x; }

struct EigenDecomposition {
    CVector values;
    CMatrix vectors;  // unit 2-norm columns
};

inline constexpr double kEigTolerance = 1e-10;

/// General (non-Hermitian) eigendecomposition with the residual contract
/// ||M v - lambda v|| <= 1e-10 ||M||_F checked on every pair.
inline EigenDecomposition eig_general(const CMatrix& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("eig_general: matrix is not square");
    require_finite(m, "eig_general matrix");
    EigenDecomposition out;
    if (m.rows() == 0) return out;

    Eigen::ComplexEigenSolver<CMatrix> solver(m, true);
    if (solver.info() != Eigen::Success) throw NumericalError("eig_general: QR iteration did not converge");
    out.values = solver.eigenvalues();
    out.vectors = solver.eigenvectors();
    for (Eigen::Index j = 0; j < out.vectors.cols(); ++j) {
        const double nrm = out.vectors.col(j).norm();
        if (nrm == 0.0) throw NumericalError("eig_general: zero eigenvector");
        out.vectors.col(j) /= nrm;
    }
    const double bound = kEigTolerance * std::max(m.norm(), std::numeric_limits<double>::min());
    for (Eigen::Index j = 0; j < out.vectors.cols(); ++j) {
        const double res = (m * out.vectors.col(j) - out.values(j) * out.vectors.col(j)).norm();
        if (!(res <= bound)) {
            std::ostringstream os;
            os << "eig_general: eigenpair " << j << " residual " << res << " exceeds " << bound;
            throw NumericalError(os.str());
        }
    }
    return out;
}

/// Largest and smallest singular values by power iteration on M^H M and on
/// (M^H M)^{-1} (through an LU factorization). Returns the 2-norm condition estimate.
inline double condition_estimate(const CMatrix& m, int iterations = 200) {
    if (m.rows() != m.cols() || m.rows() == 0) throw std::invalid_argument("condition_estimate: square, non-empty");
    CVector v = CVector::Ones(m.rows()).normalized();
    double smax = 0.0;
    for (int it = 0; it < iterations; ++it) {
        CVector w = m.adjoint() * (m * v);
        const double nrm = w.norm();
        if (nrm == 0.0) break;
        const double prev = smax;
        smax = std::sqrt(nrm);
        v = w / nrm;
        if (std::abs(smax - prev) <= 1e-12 * smax) break;
    }
    Eigen::PartialPivLU<CMatrix> lu(m);
    Eigen::PartialPivLU<CMatrix> lu_h(m.adjoint());
    v = CVector::Ones(m.rows()).normalized();
    double inv_smin = 0.0;
    for (int it = 0; it < iterations; ++it) {
        CVector w = lu.solve(lu_h.solve(v));
        const double nrm = w.norm();
        if (nrm == 0.0 || !std::isfinite(nrm)) break;
        const double prev = inv_smin;
        inv_smin = std::sqrt(nrm);
        v = w / nrm;
        if (std::abs(inv_smin - prev) <= 1e-12 * inv_smin) break;
    }
    return smax * inv_smin;
}

}  // namespace euvwg
