#pragma once

// Layer operators in Fourier space and their modal bases.
//
// Substituting H = h(x, y) exp(-i kz z) into the coupled equations
//   lap Hx + k0^2 eps Hx + gy (dHy/dx - dHx/dy) = 0
//   lap Hy + k0^2 eps Hy + gx (dHx/dy - dHy/dx) = 0,     g = (1/eps) grad eps,
// with d/dx -> -i Kx, d/dy -> -i Ky, gives kz^2 h = M h where
//   M = [ -K^2 + k0^2 T(eps) + i T(gy) Ky        -i T(gy) Kx                  ]
//       [ -i T(gx) Ky                            -K^2 + k0^2 T(eps) + i T(gx) Kx ]
// The 2D TM operator is the Hy block with Ky = 0, and 2D TE (field Ey) is
// k0^2 T(eps) - Kx^2.

#include "euvwg/geometry.hpp"

namespace euvwg {

struct ModalBasis {
    int layer = -1;
    Polarization polarization = Polarization::TE;
    CVector kz;       // one propagation constant per mode, Im <= 0 (ties Re >= 0)
    CMatrix vectors;  // columns: mode profiles (B_p) or stacked (B_p; C_p), unit norm
    double max_residual = 0.0;  // max ||M v - kz^2 v|| / ||M||_F
    bool analytic = false;

    [[nodiscard]] Eigen::Index mode_count() const { return kz.size(); }
};

inline void check_polarization(Polarization pol, const HarmonicGrid& g) {
    if (g.three_d != (pol == Polarization::Vector))
        throw std::invalid_argument("polarization " + to_string(pol) + " does not match a " +
                                    (g.three_d ? "3D" : "2D") + " harmonic grid");
}

inline CMatrix build_layer_matrix(const PermittivityFourier& pf, const HarmonicGrid& g, Polarization pol) {
    check_polarization(pol, g);
    const int n = g.size();
    const double k02 = g.k0 * g.k0;
    const CMatrix t_eps = toeplitz_from_coeffs(pf.eps, g.Nx, g.Ny);
    Eigen::VectorXd kx(n), ky(n), k2(n);
    for (int i = 0; i < n; ++i) {
        kx(i) = g.kx[i];
        ky(i) = g.ky[i];
        k2(i) = g.kx[i] * g.kx[i] + g.ky[i] * g.ky[i];
    }
    if (pol == Polarization::TE) {
        CMatrix m = k02 * t_eps;
        m.diagonal() -= k2.cast<cplx>();
        return m;
    }
    const CMatrix t_gx = toeplitz_from_coeffs(pf.grad_x, g.Nx, g.Ny);
    if (pol == Polarization::TM) {
        CMatrix m = k02 * t_eps + kI * (t_gx * kx.cast<cplx>().asDiagonal());
        m.diagonal() -= k2.cast<cplx>();
        return m;
    }
    const CMatrix t_gy = toeplitz_from_coeffs(pf.grad_y, g.Nx, g.Ny);
    CMatrix m(2 * n, 2 * n);
    CMatrix base = k02 * t_eps;
    base.diagonal() -= k2.cast<cplx>();
    m.topLeftCorner(n, n) = base + kI * (t_gy * ky.cast<cplx>().asDiagonal());
    m.topRightCorner(n, n) = -kI * (t_gy * kx.cast<cplx>().asDiagonal());
    m.bottomLeftCorner(n, n) = -kI * (t_gx * ky.cast<cplx>().asDiagonal());
    m.bottomRightCorner(n, n) = base + kI * (t_gx * kx.cast<cplx>().asDiagonal());
    return m;
}

inline ModalBasis solve_modes(const CMatrix& layer_matrix, const HarmonicGrid& g, Polarization pol, int layer = -1) {
    check_polarization(pol, g);
    const Eigen::Index expected = pol == Polarization::Vector ? 2 * g.size() : g.size();
    if (layer_matrix.rows() != expected) throw std::invalid_argument("solve_modes: layer matrix size mismatch");
    const auto eig = eig_general(layer_matrix);
    ModalBasis basis;
    basis.layer = layer;
    basis.polarization = pol;
    basis.vectors = eig.vectors;
    basis.kz.resize(eig.values.size());
    for (Eigen::Index p = 0; p < eig.values.size(); ++p) basis.kz(p) = branch_sqrt(eig.values(p));
    const double fro = layer_matrix.norm();
    for (Eigen::Index p = 0; p < eig.values.size(); ++p) {
        const double res = (layer_matrix * eig.vectors.col(p) - eig.values(p) * eig.vectors.col(p)).norm();
        basis.max_residual = std::max(basis.max_residual, fro > 0.0 ? res / fro : res);
    }
    return basis;
}

/// Closed-form basis of a homogeneous layer: identity profiles, kz = sqrt(k0^2 eps - |k_t|^2).
inline ModalBasis homogeneous_modes(cplx eps, const HarmonicGrid& g, Polarization pol, int layer = -1) {
    check_polarization(pol, g);
    const int n = g.size();
    const int count = pol == Polarization::Vector ? 2 * n : n;
    ModalBasis basis;
    basis.layer = layer;
    basis.polarization = pol;
    basis.analytic = true;
    basis.vectors = CMatrix::Identity(count, count);
    basis.kz.resize(count);
    for (int p = 0; p < count; ++p) basis.kz(p) = g.kz_in(eps, p % n);
    return basis;
}

}  // namespace euvwg
