#pragma once

// Closed-form references for uniform (unpatterned) stacks: plane wave, Fresnel
// interface and a transfer-matrix recursion with internal fields, plus a
// brute-force finite-difference Helmholtz solve used to cross-check the latter.
// Nothing here touches the modal solver.

#include "euvwg/matching.hpp"

#include <Eigen/SparseLU>

namespace euvwg::oracle {

/// exp(-i (kx x - kz z)): unit plane wave travelling towards -z.
inline cplx plane_wave_field(double kx, cplx kz, double x, double z) { return std::exp(-kI * (kx * x - kz * z)); }

struct FresnelResult {
    cplx r;
    cplx t;
};

inline cplx admittance(cplx kz, cplx eps, Polarization pol) { return pol == Polarization::TM ? kz / eps : kz; }

/// Interface from eps1 (above) to eps2 (below) for a wave incident from above.
/// TE amplitudes refer to Ey, TM amplitudes to Hy.
inline FresnelResult fresnel_rt(cplx eps1, cplx eps2, double k0, double kx, Polarization pol) {
    if (pol == Polarization::Vector) throw std::invalid_argument("fresnel_rt: TE or TM only");
    const cplx q1 = admittance(branch_sqrt(k0 * k0 * eps1 - kx * kx), eps1, pol);
    const cplx q2 = admittance(branch_sqrt(k0 * k0 * eps2 - kx * kx), eps2, pol);
    if (std::abs(q1 + q2) == 0.0) throw std::domain_error("fresnel_rt: degenerate denominator");
    return {(q1 - q2) / (q1 + q2), 2.0 * q1 / (q1 + q2)};
}

struct UniformLayer {
    cplx eps{1.0, 0.0};
    double thickness = 0.0;
};

struct OracleSolution {
    cplx r;
    cplx t;
    // configuration echo
    std::vector<UniformLayer> layers;
    cplx eps_top{1.0, 0.0};
    cplx eps_bottom{1.0, 0.0};
    double k0 = 1.0;
    double kx = 0.0;
    Polarization polarization = Polarization::TE;
    // per region (0 = above, J + 1 = substrate): kz, down amplitude at the region top,
    // up amplitude at the region bottom; z of each interface
    std::vector<cplx> kz;
    std::vector<cplx> down;
    std::vector<cplx> up;
    std::vector<double> interfaces;

    [[nodiscard]] std::size_t region_of(double z) const {
        if (z >= 0.0) return 0;
        for (std::size_t j = 0; j + 1 < interfaces.size(); ++j)
            if (z >= interfaces[j + 1]) return j + 1;
        return interfaces.size();
    }

    /// Field amplitude profile along z (multiply by exp(-i kx x) for the full field).
    [[nodiscard]] cplx profile(double z) const { return eval(z, false); }
    [[nodiscard]] cplx profile_dz(double z) const { return eval(z, true); }
    [[nodiscard]] cplx field(double x, double z) const { return std::exp(-kI * (kx * x)) * profile(z); }

private:
    [[nodiscard]] cplx eval(double z, bool derivative) const {
        const std::size_t r = region_of(z);
        const cplx k = kz[r];
        const double top = r == 0 ? 0.0 : interfaces[r - 1];
        const double bottom = r < interfaces.size() ? interfaces[r] : top;
        // above: incident referenced to z = 0 and reflected wave at z = 0
        const cplx dn = down[r] * std::exp(kI * k * (z - top));
        const cplx upw = r == interfaces.size() ? cplx{} : up[r] * std::exp(-kI * k * (z - bottom));
        return derivative ? kI * k * (dn - upw) : dn + upw;
    }
};

/// Transfer-matrix (reflection-recursion) solution for a stack of uniform layers.
/// Phases are referenced so every stored exponential has magnitude <= 1.
inline OracleSolution tmm_multilayer(const std::vector<UniformLayer>& layers, cplx eps_top, cplx eps_bottom, double k0,
                                     double kx, Polarization pol) {
    if (pol == Polarization::Vector) throw std::invalid_argument("tmm_multilayer: TE or TM only");
    OracleSolution s;
    s.layers = layers;
    s.eps_top = eps_top;
    s.eps_bottom = eps_bottom;
    s.k0 = k0;
    s.kx = kx;
    s.polarization = pol;
    const std::size_t J = layers.size();
    std::vector<cplx> eps(J + 2);
    std::vector<double> d(J + 2, 0.0);
    eps[0] = eps_top;
    eps[J + 1] = eps_bottom;
    for (std::size_t j = 0; j < J; ++j) {
        eps[j + 1] = layers[j].eps;
        d[j + 1] = layers[j].thickness;
    }
    s.kz.resize(J + 2);
    std::vector<cplx> q(J + 2);
    for (std::size_t i = 0; i < J + 2; ++i) {
        s.kz[i] = branch_sqrt(k0 * k0 * eps[i] - kx * kx);
        q[i] = admittance(s.kz[i], eps[i], pol);
    }
    double z = 0.0;
    s.interfaces.push_back(z);
    for (std::size_t j = 0; j < J; ++j) {
        z -= layers[j].thickness;
        s.interfaces.push_back(z);
    }

    // rho[i]: up/down ratio at the bottom of region i; gamma[i]: same ratio at its top.
    std::vector<cplx> rho(J + 2), gamma(J + 2);
    gamma[J + 1] = 0.0;
    for (std::size_t ii = J + 1; ii-- > 0;) {
        const cplx rij = (q[ii] - q[ii + 1]) / (q[ii] + q[ii + 1]);
        rho[ii] = (rij + gamma[ii + 1]) / (1.0 + rij * gamma[ii + 1]);
        gamma[ii] = rho[ii] * std::exp(-2.0 * kI * s.kz[ii] * d[ii]);
    }
    s.down.assign(J + 2, cplx{});
    s.up.assign(J + 2, cplx{});
    s.down[0] = 1.0;
    s.up[0] = rho[0];
    for (std::size_t i = 0; i <= J; ++i) {
        const cplx down_bottom = s.down[i] * std::exp(-kI * s.kz[i] * d[i]);
        s.up[i] = rho[i] * down_bottom;
        s.down[i + 1] = (1.0 + rho[i]) * down_bottom / (1.0 + gamma[i + 1]);
    }
    s.r = s.up[0];
    s.t = s.down[J + 1];
    return s;
}

/// Second-order finite-difference solve of E'' + (k0^2 eps(z) - kx^2) E = 0 (TE)
/// on [z_min, z_max] with exact one-way (Dirichlet-to-Neumann) end conditions:
/// incident plus outgoing wave at the top, outgoing wave at the bottom.
/// Cell-averaged coefficients keep second order across material jumps.
inline std::vector<cplx> fd_helmholtz(const std::vector<UniformLayer>& layers, cplx eps_top, cplx eps_bottom, double k0,
                                      double kx, double z_min, double z_max, int points) {
    if (points < 3 || !(z_max > 0.0)) throw std::invalid_argument("fd_helmholtz: need >= 3 points and z_max > 0");
    double depth = 0.0;
    for (const auto& l : layers) depth += l.thickness;
    if (!(z_min < -depth)) throw std::invalid_argument("fd_helmholtz: z_min must lie in the substrate");

    // piecewise-constant q(z) = k0^2 eps - kx^2 as (top, bottom, q) segments
    struct Segment {
        double top, bottom;
        cplx q;
    };
    std::vector<Segment> segs;
    segs.push_back({std::numeric_limits<double>::infinity(), 0.0, k0 * k0 * eps_top - kx * kx});
    double z = 0.0;
    for (const auto& l : layers) {
        segs.push_back({z, z - l.thickness, k0 * k0 * l.eps - kx * kx});
        z -= l.thickness;
    }
    segs.push_back({z, -std::numeric_limits<double>::infinity(), k0 * k0 * eps_bottom - kx * kx});
    auto cell_average = [&](double lo, double hi) {
        cplx acc{};
        for (const auto& s : segs) {
            const double a = std::max(lo, s.bottom);
            const double b = std::min(hi, s.top);
            if (b > a) acc += s.q * (b - a);
        }
        return acc / (hi - lo);
    };

    const int n = points;
    const double h = (z_max - z_min) / (n - 1);
    const cplx k_top = branch_sqrt(segs.front().q);
    const cplx k_bot = branch_sqrt(segs.back().q);
    Eigen::SparseMatrix<cplx> a(n, n);
    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(std::size_t(3 * n));
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
    const double h2 = h * h;
    for (int i = 0; i < n; ++i) {
        const double zi = z_min + h * i;
        if (i == 0) {
            const cplx q = cell_average(zi, zi + 0.5 * h);
            trip.emplace_back(0, 0, (-2.0 - 2.0 * kI * k_bot * h) / h2 + q);
            trip.emplace_back(0, 1, 2.0 / h2);
        } else if (i == n - 1) {
            const cplx q = cell_average(zi - 0.5 * h, zi);
            trip.emplace_back(i, i, (-2.0 - 2.0 * kI * k_top * h) / h2 + q);
            trip.emplace_back(i, i - 1, 2.0 / h2);
            rhs(i) = -4.0 * kI * k_top * h * std::exp(kI * k_top * zi) / h2;
        } else {
            const cplx q = cell_average(zi - 0.5 * h, zi + 0.5 * h);
            trip.emplace_back(i, i - 1, 1.0 / h2);
            trip.emplace_back(i, i, -2.0 / h2 + q);
            trip.emplace_back(i, i + 1, 1.0 / h2);
        }
    }
    a.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw NumericalError("fd_helmholtz: factorization failed");
    Eigen::VectorXcd e = lu.solve(rhs);
    return {e.data(), e.data() + e.size()};
}

/// Samples an oracle solution on a 2D (x, z) grid as a single-component field.
inline FieldGrid oracle_field(const OracleSolution& s, const SampleSpec& spec, const std::string& component) {
    FieldGrid f;
    f.components = {component};
    for (int i = 0; i < spec.x.count; ++i) f.xs.push_back(spec.x.at(i));
    for (int i = 0; i < spec.y.count; ++i) f.ys.push_back(spec.y.at(i));
    for (int i = 0; i < spec.z.count; ++i) f.zs.push_back(spec.z.at(i));
    f.data.assign(1, std::vector<cplx>(f.samples()));
    for (std::size_t iz = 0; iz < f.zs.size(); ++iz) {
        const cplx p = s.profile(f.zs[iz]);
        for (std::size_t iy = 0; iy < f.ys.size(); ++iy)
            for (std::size_t ix = 0; ix < f.xs.size(); ++ix)
                f.data[0][f.offset(ix, iy, iz)] = std::exp(-kI * (s.kx * f.xs[ix])) * p;
    }
    return f;
}

}  // namespace euvwg::oracle
