#pragma once

// Global mode-matching system M A = R, its direct solution, field synthesis and
// diffraction efficiencies.
//
// Every region (vacuum above, each layer, substrate below) carries modes
// travelling as exp(+i kz z) ("down", towards the substrate) and exp(-i kz z)
// ("up"). A mode is described by its tangential field vector at its reference
// plane; rows of M state continuity of those tangential fields at each interface.
//
// Tangential components per interface (normalised so the incident wave has unit
// amplitude, E' = curl H / (i k0 eps) and H' = Z0 H for TE):
//   TE:     [Ey ; H'x]
//   TM:     [Hy ; E'x]
//   vector: [Hx ; Hy ; E'x ; E'y]
//
// Unknown ordering: reflected | layer 1 down, layer 1 up | ... | layer J down,
// layer J up | transmitted. For the vector case each block lists the
// x-polarised orders first, then the y-polarised ones. The reflected and
// transmitted unknowns are the field amplitudes (Ey, Hy or (Hx, Hy)) of each
// order at z = 0 and z = -D respectively.

#include "euvwg/modes.hpp"

#include <chrono>
#include <cstdint>
#include <limits>

namespace euvwg {

enum class PhaseReference {
    Stable,  // down modes referenced to the layer top, up modes to the layer bottom
    Top,
    Bottom
};

struct Problem {
    MaskStack stack;
    PlaneWaveSource source;
    HarmonicGrid grid;
    Polarization polarization = Polarization::TE;
    std::vector<PermittivityFourier> coeffs;
    std::vector<ModalBasis> bases;
    double seconds_fourier = 0.0;
    double seconds_modes = 0.0;
};

inline Polarization polarization_for(const MaskStack& stack, const PlaneWaveSource& src) {
    if (stack.three_d()) return Polarization::Vector;
    if (src.polarization == Polarization::Vector) throw ConfigError("2D stacks need TE or TM polarization");
    return src.polarization;
}

/// Builds the harmonic grid, Fourier coefficients and modal bases of every layer.
/// Uniform layers use the closed-form basis unless `numeric_uniform` is set.
inline Problem prepare_problem(const MaskStack& stack, const PlaneWaveSource& src, int Nx, int Ny,
                               bool numeric_uniform = false) {
    stack.validate();
    Problem pb;
    pb.stack = stack;
    pb.source = src;
    pb.polarization = polarization_for(stack, src);
    pb.grid = build_harmonics(src, stack, Nx, Ny);
    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();
    for (std::size_t j = 0; j < stack.layers.size(); ++j)
        pb.coeffs.push_back(fourier_coeffs(stack.layers[j], pb.grid, static_cast<int>(j)));
    auto t1 = clock::now();
    for (std::size_t j = 0; j < stack.layers.size(); ++j) {
        const auto& pf = pb.coeffs[j];
        if (pf.uniform && !numeric_uniform)
            pb.bases.push_back(homogeneous_modes(pf.eps(0, 0), pb.grid, pb.polarization, static_cast<int>(j)));
        else
            pb.bases.push_back(
                solve_modes(build_layer_matrix(pf, pb.grid, pb.polarization), pb.grid, pb.polarization, static_cast<int>(j)));
    }
    auto t2 = clock::now();
    pb.seconds_fourier = std::chrono::duration<double>(t1 - t0).count();
    pb.seconds_modes = std::chrono::duration<double>(t2 - t1).count();
    return pb;
}

struct SystemLayout {
    Polarization polarization = Polarization::TE;
    int harmonics = 0;  // N
    int layers = 0;     // J
    int Nx = 0;
    int Ny = 0;

    [[nodiscard]] Eigen::Index modes() const { return polarization == Polarization::Vector ? 2 * harmonics : harmonics; }
    [[nodiscard]] Eigen::Index rows_per_interface() const { return 2 * modes(); }
    [[nodiscard]] Eigen::Index size() const { return 2 * modes() * (layers + 1); }
    [[nodiscard]] Eigen::Index reflected_offset() const { return 0; }
    [[nodiscard]] Eigen::Index layer_down_offset(int j) const { return modes() + 2 * modes() * j; }
    [[nodiscard]] Eigen::Index layer_up_offset(int j) const { return layer_down_offset(j) + modes(); }
    [[nodiscard]] Eigen::Index transmitted_offset() const { return modes() + 2 * modes() * layers; }

    [[nodiscard]] std::string describe() const {
        std::ostringstream os;
        os << "pol=" << to_string(polarization) << ";Nx=" << Nx << ";Ny=" << Ny << ";N=" << harmonics << ";J=" << layers
           << ";blocks=r:" << modes();
        for (int j = 0; j < layers; ++j) os << ",L" << j + 1 << "down:" << modes() << ",L" << j + 1 << "up:" << modes();
        os << ",t:" << modes() << ";size=" << size();
        return os.str();
    }

    [[nodiscard]] std::uint64_t fingerprint() const {
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char c : describe()) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return h;
    }
};

/// Tangential fields of one region's modes at their reference planes.
struct RegionFields {
    CMatrix down;  // rows_per_interface x modes
    CMatrix up;
    CVector kz;
    double z_top = 0.0;
    double z_bottom = 0.0;
    double ref_down = 0.0;
    double ref_up = 0.0;
    bool has_down = true;
    bool has_up = true;

    [[nodiscard]] CVector phase_down(double z) const {
        return (kI * kz.array() * (z - ref_down)).exp().matrix();
    }
    [[nodiscard]] CVector phase_up(double z) const {
        return (-kI * kz.array() * (z - ref_up)).exp().matrix();
    }
};

inline constexpr double kGrazingTol = 1e-12;

/// Tangential field vectors (see header comment) of modes exp(i s kz z) with
/// Fourier profiles `profiles` inside a region whose 1/eps multiplication
/// operator is `inv_eps`.
inline CMatrix tangential_fields(const CMatrix& profiles, const CVector& kz, int s, const CMatrix& inv_eps,
                                 const HarmonicGrid& g, Polarization pol) {
    const int n = g.size();
    const Eigen::Index p = profiles.cols();
    const CVector skz = double(s) * kz / g.k0;
    if (pol == Polarization::TE) {
        CMatrix f(2 * n, p);
        f.topRows(n) = profiles;
        f.bottomRows(n) = profiles * skz.asDiagonal();
        return f;
    }
    if (pol == Polarization::TM) {
        CMatrix f(2 * n, p);
        f.topRows(n) = profiles;
        f.bottomRows(n) = -(inv_eps * (profiles * skz.asDiagonal()));
        return f;
    }
    for (Eigen::Index q = 0; q < p; ++q)
        if (std::abs(kz(q)) < kGrazingTol * g.k0)
            throw NumericalError("grazing order: a mode has kz = 0, the vector system is singular");
    Eigen::VectorXcd kx(n), ky(n);
    for (int i = 0; i < n; ++i) {
        kx(i) = g.kx[i];
        ky(i) = g.ky[i];
    }
    const CMatrix b = profiles.topRows(n);
    const CMatrix c = profiles.bottomRows(n);
    // Hz from div H = 0: hz = s (Kx hx + Ky hy) / kz
    const CMatrix hz = (kx.asDiagonal() * b + ky.asDiagonal() * c) * (double(s) * kz.cwiseInverse()).asDiagonal();
    CMatrix f(4 * n, p);
    f.topRows(2 * n) = profiles;
    f.middleRows(2 * n, n) = -(inv_eps * (ky.asDiagonal() * hz + c * skz.asDiagonal() * g.k0)) / g.k0;
    f.bottomRows(n) = inv_eps * (b * skz.asDiagonal() * g.k0 + kx.asDiagonal() * hz) / g.k0;
    return f;
}

struct GlobalSystem {
    CMatrix M;
    CVector R;
    SystemLayout layout;
    PhaseReference reference = PhaseReference::Stable;
    std::vector<double> interface_z;    // J + 1 entries, top to bottom
    std::vector<RegionFields> regions;  // vacuum above, layers, substrate
    CVector incident_amplitudes;        // down-mode amplitudes of the incident wave in the top region
    HarmonicGrid grid;
    cplx substrate_eps{1.0, 0.0};
};

inline RegionFields homogeneous_region(cplx eps, const HarmonicGrid& g, Polarization pol) {
    const ModalBasis b = homogeneous_modes(eps, g, pol);
    const CMatrix inv = CMatrix::Identity(g.size(), g.size()) / eps;
    RegionFields r;
    r.kz = b.kz;
    r.down = tangential_fields(b.vectors, b.kz, +1, inv, g, pol);
    r.up = tangential_fields(b.vectors, b.kz, -1, inv, g, pol);
    return r;
}

/// Unit-norm incident H (or the scalar field in 2D) expressed as down-mode amplitudes.
inline CVector incident_amplitudes(const PlaneWaveSource& src, const HarmonicGrid& g, Polarization pol) {
    const int n = g.size();
    const int i0 = g.incident_index();
    if (pol != Polarization::Vector) {
        CVector a = CVector::Zero(n);
        a(i0) = 1.0;
        return a;
    }
    CVector a = CVector::Zero(2 * n);
    const cplx hx = src.h0[0];
    const cplx hy = src.h0[1];
    const cplx hz = (g.kx[i0] * hx + g.ky[i0] * hy) / g.kz[i0];
    const double nrm = std::sqrt(std::norm(hx) + std::norm(hy) + std::norm(hz));
    if (!(nrm > 0.0)) throw ConfigError("source: H0 amplitude must be nonzero");
    a(i0) = hx / nrm;
    a(n + i0) = hy / nrm;
    return a;
}

inline GlobalSystem assemble_global(const Problem& pb, PhaseReference reference = PhaseReference::Stable) {
    const auto& g = pb.grid;
    const auto pol = pb.polarization;
    const int J = static_cast<int>(pb.stack.layers.size());
    if (pb.bases.size() != std::size_t(J) || pb.coeffs.size() != std::size_t(J))
        throw std::invalid_argument("assemble_global: need one modal basis and coefficient set per layer");

    GlobalSystem sys;
    sys.grid = g;
    sys.reference = reference;
    sys.substrate_eps = pb.stack.substrate_eps;
    sys.layout = SystemLayout{pol, g.size(), J, g.Nx, g.Ny};
    const auto& lay = sys.layout;
    const Eigen::Index P = lay.modes();
    const Eigen::Index Rn = lay.rows_per_interface();
    for (int i = 0; i <= J; ++i) sys.interface_z.push_back(pb.stack.interface_z(std::size_t(i)));

    // Regions
    RegionFields top = homogeneous_region(cplx{1.0, 0.0}, g, pol);
    top.z_top = std::numeric_limits<double>::infinity();
    top.z_bottom = 0.0;
    sys.regions.push_back(std::move(top));
    for (int j = 0; j < J; ++j) {
        const auto& basis = pb.bases[j];
        if (basis.mode_count() != P) throw std::invalid_argument("assemble_global: modal basis size mismatch");
        const CMatrix inv = toeplitz_from_coeffs(pb.coeffs[j].inv_eps, g.Nx, g.Ny);
        RegionFields r;
        r.kz = basis.kz;
        r.down = tangential_fields(basis.vectors, basis.kz, +1, inv, g, pol);
        r.up = tangential_fields(basis.vectors, basis.kz, -1, inv, g, pol);
        r.z_top = sys.interface_z[j];
        r.z_bottom = sys.interface_z[j + 1];
        switch (reference) {
            case PhaseReference::Stable: r.ref_down = r.z_top; r.ref_up = r.z_bottom; break;
            case PhaseReference::Top: r.ref_down = r.ref_up = r.z_top; break;
            case PhaseReference::Bottom: r.ref_down = r.ref_up = r.z_bottom; break;
        }
        sys.regions.push_back(std::move(r));
    }
    RegionFields bottom = homogeneous_region(pb.stack.substrate_eps, g, pol);
    bottom.z_top = sys.interface_z.back();
    bottom.z_bottom = -std::numeric_limits<double>::infinity();
    bottom.ref_down = bottom.z_top;
    bottom.has_up = false;
    sys.regions.push_back(std::move(bottom));
    sys.regions.front().has_down = false;  // only the incident wave travels down above the mask

    sys.M = CMatrix::Zero(lay.size(), lay.size());
    sys.R = CVector::Zero(lay.size());
    for (int i = 0; i <= J; ++i) {
        const Eigen::Index row = Rn * i;
        const double z = sys.interface_z[i];
        // region above interface i
        if (i == 0) {
            sys.M.block(row, lay.reflected_offset(), Rn, P) += sys.regions[0].up;
        } else {
            const auto& r = sys.regions[i];
            sys.M.block(row, lay.layer_down_offset(i - 1), Rn, P) += r.down * r.phase_down(z).asDiagonal();
            sys.M.block(row, lay.layer_up_offset(i - 1), Rn, P) += r.up * r.phase_up(z).asDiagonal();
        }
        // region below interface i
        if (i == J) {
            sys.M.block(row, lay.transmitted_offset(), Rn, P) -= sys.regions.back().down;
        } else {
            const auto& r = sys.regions[i + 1];
            sys.M.block(row, lay.layer_down_offset(i), Rn, P) -= r.down * r.phase_down(z).asDiagonal();
            sys.M.block(row, lay.layer_up_offset(i), Rn, P) -= r.up * r.phase_up(z).asDiagonal();
        }
    }
    sys.incident_amplitudes = incident_amplitudes(pb.source, g, pol);
    sys.R.head(Rn) = -(sys.regions[0].down * sys.incident_amplitudes);
    require_finite(sys.M, "assemble_global matrix");
    return sys;
}

struct AmplitudeVector {
    CVector values;
    SystemLayout layout;
    double relative_residual = 0.0;

    [[nodiscard]] auto reflected() const { return values.segment(layout.reflected_offset(), layout.modes()); }
    [[nodiscard]] auto transmitted() const { return values.segment(layout.transmitted_offset(), layout.modes()); }
    [[nodiscard]] auto layer_down(int j) const { return values.segment(layout.layer_down_offset(j), layout.modes()); }
    [[nodiscard]] auto layer_up(int j) const { return values.segment(layout.layer_up_offset(j), layout.modes()); }
};

inline double system_residual(const GlobalSystem& sys, const CVector& a) {
    const double rn = sys.R.norm();
    return (sys.M * a - sys.R).norm() / (rn > 0.0 ? rn : 1.0);
}

inline AmplitudeVector solve_direct(const GlobalSystem& sys) {
    const auto res = lu_solve_report(sys.M, sys.R);
    return AmplitudeVector{res.x, sys.layout, res.relative_residual};
}

inline AmplitudeVector make_amplitudes(const GlobalSystem& sys, CVector values) {
    if (values.size() != sys.layout.size()) throw std::invalid_argument("amplitude vector length does not match the system");
    AmplitudeVector a{std::move(values), sys.layout, 0.0};
    a.relative_residual = system_residual(sys, a.values);
    return a;
}

/// Inclusive uniform sampling: `count` points spanning [lo, hi].
struct Axis {
    double lo = 0.0;
    double hi = 0.0;
    int count = 1;

    [[nodiscard]] double at(int i) const { return count == 1 ? lo : lo + (hi - lo) * double(i) / double(count - 1); }
};

struct SampleSpec {
    Axis x;
    Axis y;
    Axis z;
};

struct FieldGrid {
    std::vector<double> xs, ys, zs;
    std::vector<std::string> components;
    std::vector<std::vector<cplx>> data;  // per component, index (iz * ny + iy) * nx + ix

    [[nodiscard]] std::size_t samples() const { return xs.size() * ys.size() * zs.size(); }
    [[nodiscard]] std::size_t offset(std::size_t ix, std::size_t iy, std::size_t iz) const {
        return (iz * ys.size() + iy) * xs.size() + ix;
    }
    [[nodiscard]] cplx at(std::size_t c, std::size_t ix, std::size_t iy, std::size_t iz) const {
        return data[c][offset(ix, iy, iz)];
    }
};

inline std::vector<std::string> field_components(Polarization pol) {
    switch (pol) {
        case Polarization::TE: return {"Ey"};
        case Polarization::TM: return {"Hy", "Ex"};
        case Polarization::Vector: return {"Hx", "Hy", "Ex", "Ey"};
    }
    return {};
}

/// Region index (0 = above, J + 1 = substrate) containing z.
inline std::size_t region_of(const GlobalSystem& sys, double z) {
    if (z >= 0.0) return 0;
    const std::size_t J = sys.interface_z.size() - 1;
    for (std::size_t j = 0; j < J; ++j)
        if (z >= sys.interface_z[j + 1]) return j + 1;
    return J + 1;
}

/// Fourier vector of the tangential fields at height z.
inline CVector tangential_at(const AmplitudeVector& a, const GlobalSystem& sys, double z) {
    const std::size_t r = region_of(sys, z);
    const auto& reg = sys.regions[r];
    const std::size_t J = sys.interface_z.size() - 1;
    if (r == 0) {
        return reg.down * (sys.incident_amplitudes.cwiseProduct(reg.phase_down(z))) +
               reg.up * (CVector(a.reflected()).cwiseProduct(reg.phase_up(z)));
    }
    if (r == J + 1) return reg.down * (CVector(a.transmitted()).cwiseProduct(reg.phase_down(z)));
    const int j = static_cast<int>(r) - 1;
    return reg.down * (CVector(a.layer_down(j)).cwiseProduct(reg.phase_down(z))) +
           reg.up * (CVector(a.layer_up(j)).cwiseProduct(reg.phase_up(z)));
}

inline FieldGrid reconstruct_field(const AmplitudeVector& a, const GlobalSystem& sys, const SampleSpec& spec) {
    if (a.values.size() != sys.layout.size()) throw std::invalid_argument("reconstruct_field: amplitude layout mismatch");
    for (const Axis* ax : {&spec.x, &spec.y, &spec.z})
        if (ax->count < 1 || !std::isfinite(ax->lo) || !std::isfinite(ax->hi) || ax->hi < ax->lo)
            throw std::invalid_argument("reconstruct_field: invalid sampling axis");
    if (!sys.grid.three_d && spec.y.count != 1) throw std::invalid_argument("reconstruct_field: 2D fields take one y sample");

    const auto& g = sys.grid;
    const int n = g.size();
    FieldGrid f;
    f.components = field_components(sys.layout.polarization);
    for (int i = 0; i < spec.x.count; ++i) f.xs.push_back(spec.x.at(i));
    for (int i = 0; i < spec.y.count; ++i) f.ys.push_back(spec.y.at(i));
    for (int i = 0; i < spec.z.count; ++i) f.zs.push_back(spec.z.at(i));
    f.data.assign(f.components.size(), std::vector<cplx>(f.samples()));

    // psi_i(x, y) tables
    CMatrix psi(f.xs.size() * f.ys.size(), n);
    for (std::size_t iy = 0; iy < f.ys.size(); ++iy)
        for (std::size_t ix = 0; ix < f.xs.size(); ++ix)
            for (int i = 0; i < n; ++i)
                psi(Eigen::Index(iy * f.xs.size() + ix), i) = std::exp(-kI * (g.kx[i] * f.xs[ix] + g.ky[i] * f.ys[iy]));

    const std::size_t plane = f.xs.size() * f.ys.size();
    for (std::size_t iz = 0; iz < f.zs.size(); ++iz) {
        const CVector v = tangential_at(a, sys, f.zs[iz]);
        for (std::size_t c = 0; c < f.components.size(); ++c) {
            const CVector vals = psi * v.segment(Eigen::Index(c) * n, n);
            for (std::size_t k = 0; k < plane; ++k) f.data[c][iz * plane + k] = vals(Eigen::Index(k));
        }
    }
    return f;
}

inline double relative_l2(const FieldGrid& u, const FieldGrid& ref) {
    if (u.components.size() != ref.components.size() || u.samples() != ref.samples())
        throw std::invalid_argument("relative_l2: field grids have different shapes");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t c = 0; c < u.data.size(); ++c) {
        if (u.data[c].size() != ref.data[c].size()) throw std::invalid_argument("relative_l2: component size mismatch");
        for (std::size_t k = 0; k < u.data[c].size(); ++k) {
            num += std::norm(u.data[c][k] - ref.data[c][k]);
            den += std::norm(ref.data[c][k]);
        }
    }
    if (den == 0.0) throw std::invalid_argument("relative_l2: reference field has zero norm");
    return std::sqrt(num / den);
}

/// Time-averaged z flux (up to a common constant) of harmonic i in a tangential field vector.
inline double z_flux(const CVector& v, int i, int n, Polarization pol) {
    switch (pol) {
        case Polarization::TE: return -(v(i) * std::conj(v(n + i))).real();
        case Polarization::TM: return (v(n + i) * std::conj(v(i))).real();
        case Polarization::Vector:
            return (v(2 * n + i) * std::conj(v(n + i)) - v(3 * n + i) * std::conj(v(i))).real();
    }
    return 0.0;
}

struct OrderRow {
    int m = 0;
    int n = 0;
    std::array<cplx, 2> r{};  // scalar field amplitude in [0] for 2D; (Hx, Hy) for vector runs
    std::array<cplx, 2> t{};
    double R = 0.0;
    double T = 0.0;
};

struct OrderTable {
    std::vector<OrderRow> rows;
    double total_R = 0.0;
    double total_T = 0.0;
};

inline OrderTable diffraction_efficiencies(const AmplitudeVector& a, const GlobalSystem& sys) {
    const auto& g = sys.grid;
    const auto pol = sys.layout.polarization;
    const int n = g.size();
    const auto& top = sys.regions.front();
    const auto& bottom = sys.regions.back();
    const CVector inc = top.down * sys.incident_amplitudes;
    const CVector refl = top.up * CVector(a.reflected());
    const CVector trans = bottom.down * CVector(a.transmitted());
    const double inc_flux = std::abs(z_flux(inc, g.incident_index(), n, pol));
    const double k_tol = 1e-14 * g.k0;

    OrderTable out;
    for (int i = 0; i < n; ++i) {
        OrderRow row;
        row.m = g.m[i];
        row.n = g.n[i];
        row.r[0] = a.reflected()(i);
        row.t[0] = a.transmitted()(i);
        if (pol == Polarization::Vector) {
            row.r[1] = a.reflected()(n + i);
            row.t[1] = a.transmitted()(n + i);
        }
        if (std::abs(top.kz(i).real()) > k_tol) row.R = std::abs(z_flux(refl, i, n, pol)) / inc_flux;
        if (std::abs(bottom.kz(i).real()) > k_tol) row.T = std::abs(z_flux(trans, i, n, pol)) / inc_flux;
        out.total_R += row.R;
        out.total_T += row.T;
        out.rows.push_back(row);
    }
    return out;
}

}  // namespace euvwg
