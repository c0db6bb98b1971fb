#pragma once

// Mask stacks, materials, plane-wave sources and the truncated Fourier
// representation of layer permittivities.
//
// Conventions: time dependence exp(+i w t), so absorbing media have Im(eps) <= 0.
// Transverse harmonics are psi_mn = exp(-i kx_m x - i ky_n y) with kx_m = kappa_x m,
// and a coefficient is c_mn = (1/(Lx Ly)) * integral f(x,y) exp(+i kx_m x + i ky_n y).

#include "euvwg/numerics.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace euvwg {

inline cplx permittivity_from_nk(double n, double k) {
    const cplx idx{n, -k};
    return idx * idx;
}

struct Material {
    std::string name;
    double wavelength = 0.0;  // nm
    double n = 1.0;
    double k = 0.0;

    [[nodiscard]] cplx permittivity() const { return permittivity_from_nk(n, k); }
};

/// Optical constants keyed by name, linearly interpolated in wavelength between
/// tabulated rows. CSV layout: `name,wavelength_nm,n,k`, '#' starts a comment line.
class MaterialTable {
public:
    static MaterialTable parse(std::istream& in) {
        MaterialTable table;
        std::string line;
        bool header_seen = false;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const auto first = line.find_first_not_of(" \t");
            if (first == std::string::npos || line[first] == '#') continue;
            std::vector<std::string> cells;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) {
                const auto b = cell.find_first_not_of(" \t");
                const auto e = cell.find_last_not_of(" \t");
                cells.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
            }
            if (!header_seen) {
                if (cells != std::vector<std::string>{"name", "wavelength_nm", "n", "k"})
                    throw ConfigError("material table: expected header 'name,wavelength_nm,n,k'");
                header_seen = true;
                continue;
            }
            if (cells.size() != 4)
                throw ConfigError("material table line " + std::to_string(line_no) + ": expected 4 columns");
            Material m;
            try {
                m.name = cells[0];
                m.wavelength = std::stod(cells[1]);
                m.n = std::stod(cells[2]);
                m.k = std::stod(cells[3]);
            } catch (const std::exception&) {
                throw ConfigError("material table line " + std::to_string(line_no) + ": malformed number");
            }
            if (m.name.empty() || !(m.wavelength > 0.0) || !(m.k >= 0.0) || !std::isfinite(m.n))
                throw ConfigError("material table line " + std::to_string(line_no) +
                                  ": need a name, wavelength > 0 and k >= 0");
            table.add(m);
        }
        if (!header_seen) throw ConfigError("material table: empty input");
        return table;
    }

    static MaterialTable load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open material table '" + path + "'");
        return parse(in);
    }

    void add(const Material& m) {
        auto& rows = rows_[m.name];
        rows.push_back(m);
        std::sort(rows.begin(), rows.end(), [](const Material& a, const Material& b) { return a.wavelength < b.wavelength; });
    }

    [[nodiscard]] bool has(const std::string& name) const { return rows_.count(name) != 0; }

    [[nodiscard]] Material lookup(const std::string& name, double wavelength) const {
        const auto it = rows_.find(name);
        if (it == rows_.end()) throw ConfigError("unknown material '" + name + "'");
        const auto& rows = it->second;
        const double tol = 1e-9 * wavelength;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (std::abs(rows[i].wavelength - wavelength) <= tol) return rows[i];
            if (i + 1 < rows.size() && rows[i].wavelength < wavelength && wavelength < rows[i + 1].wavelength) {
                const double t = (wavelength - rows[i].wavelength) / (rows[i + 1].wavelength - rows[i].wavelength);
                return Material{name, wavelength, rows[i].n + t * (rows[i + 1].n - rows[i].n),
                                rows[i].k + t * (rows[i + 1].k - rows[i].k)};
            }
        }
        std::ostringstream os;
        os << "material '" << name << "' has no data covering wavelength " << wavelength << " nm";
        throw ConfigError(os.str());
    }

private:
    std::map<std::string, std::vector<Material>> rows_;
};

enum class Dimensionality { Two, Three };

struct Uniform {
    cplx eps{1.0, 0.0};
};

/// Rectangular hole (invariant along y) of width `width` centred at `center`.
struct HoleInX {
    cplx eps_background{1.0, 0.0};
    cplx eps_hole{1.0, 0.0};
    double width = 0.0;
    double center = 0.0;
};

/// Smoothed pad: eps(x,y) = 1/4 [tanh((x+a)/d) - tanh((x-a)/d)] [tanh((y+b)/d) - tanh((y-b)/d)] (1 - eps) + eps.
/// In 2D stacks the y bracket is replaced by its interior value 2.
struct TanhPad {
    cplx eps{1.0, 0.0};
    double a = 0.0;
    double b = 0.0;
    double d = 0.0;
};

using LayerPattern = std::variant<Uniform, HoleInX, TanhPad>;

struct LayerSpec {
    double thickness = 0.0;  // nm
    LayerPattern pattern;
    std::string label;
};

struct MaskStack {
    std::vector<LayerSpec> layers;  // top (z = 0) to bottom (z = -D)
    double Lx = 0.0;
    double Ly = 0.0;  // unused in 2D
    Dimensionality dim = Dimensionality::Two;
    cplx substrate_eps{1.0, 0.0};  // half-space below z = -D; above z = 0 is vacuum

    [[nodiscard]] bool three_d() const { return dim == Dimensionality::Three; }
    [[nodiscard]] std::size_t layer_count() const { return layers.size(); }

    [[nodiscard]] double total_thickness() const {
        double d = 0.0;
        for (const auto& l : layers) d += l.thickness;
        return d;
    }

    /// z coordinate of the top of layer j (interface j); interface J is z = -D.
    [[nodiscard]] double interface_z(std::size_t j) const {
        double z = 0.0;
        for (std::size_t i = 0; i < j && i < layers.size(); ++i) z -= layers[i].thickness;
        return z;
    }

    void validate() const {
        if (!(Lx > 0.0)) throw ConfigError("mask: Lx must be positive");
        if (three_d() && !(Ly > 0.0)) throw ConfigError("mask: Ly must be positive for 3D stacks");
        for (std::size_t j = 0; j < layers.size(); ++j) {
            const auto& l = layers[j];
            if (!(l.thickness > 0.0)) throw ConfigError("mask: layer " + std::to_string(j) + " thickness must be > 0");
            if (const auto* h = std::get_if<HoleInX>(&l.pattern)) {
                if (!(h->width > 0.0 && h->width <= Lx))
                    throw ConfigError("mask: layer " + std::to_string(j) + " hole width must lie in (0, Lx]");
            }
            if (const auto* t = std::get_if<TanhPad>(&l.pattern)) {
                if (!(t->a > 0.0 && t->d > 0.0 && (!three_d() || t->b > 0.0)))
                    throw ConfigError("mask: layer " + std::to_string(j) + " tanh pad needs a, b, d > 0");
            }
        }
    }
};

enum class Polarization { TE, TM, Vector };

inline std::string to_string(Polarization p) {
    switch (p) {
        case Polarization::TE: return "TE";
        case Polarization::TM: return "TM";
        case Polarization::Vector: return "vector";
    }
    return "?";
}

struct PlaneWaveSource {
    double wavelength = 13.5;  // nm
    double theta = 0.0;        // polar angle from -z, radians
    double phi = 0.0;          // azimuth, radians
    Polarization polarization = Polarization::TE;
    // Transverse (Hx, Hy) amplitude for 3D runs; normalised to unit |H| at build time.
    std::array<cplx, 2> h0{cplx{1.0, 0.0}, cplx{0.0, 0.0}};

    [[nodiscard]] double k0() const { return 2.0 * kPi / wavelength; }
    [[nodiscard]] double kx() const { return k0() * std::sin(theta) * std::cos(phi); }
    [[nodiscard]] double ky() const { return k0() * std::sin(theta) * std::sin(phi); }
};

inline constexpr double kCommensurateTol = 1e-9;

struct HarmonicGrid {
    double k0 = 1.0;
    double Lx = 1.0;
    double Ly = 1.0;
    double kappa_x = 2.0 * kPi;
    double kappa_y = 2.0 * kPi;
    int Nx = 0;
    int Ny = 0;
    int m0 = 0;
    int n0 = 0;
    bool three_d = false;
    std::vector<int> m;
    std::vector<int> n;
    std::vector<double> kx;
    std::vector<double> ky;
    std::vector<cplx> kz;  // free space, branch Re >= 0, Re == 0 => Im <= 0

    [[nodiscard]] int size() const { return static_cast<int>(m.size()); }
    [[nodiscard]] int index(int mm, int nn) const { return harmonic_index(mm, nn, Nx, Ny); }
    [[nodiscard]] int incident_index() const { return index(m0, n0); }

    /// Longitudinal wavenumber of harmonic i in a homogeneous medium.
    [[nodiscard]] cplx kz_in(cplx eps, int i) const { return branch_sqrt(k0 * k0 * eps - kx[i] * kx[i] - ky[i] * ky[i]); }
};

/// Harmonic orders (m0, n0) closest to the source's in-plane wavevector.
inline std::pair<int, int> nearest_orders(const PlaneWaveSource& src, const MaskStack& stack) {
    const int m0 = static_cast<int>(std::lround(src.kx() / (2.0 * kPi / stack.Lx)));
    const int n0 = stack.three_d() ? static_cast<int>(std::lround(src.ky() / (2.0 * kPi / stack.Ly))) : 0;
    return {m0, n0};
}

/// Returns a copy of `src` whose angles make the in-plane wavevector an exact
/// multiple of the grating vectors.
inline PlaneWaveSource snap_incidence(const PlaneWaveSource& src, const MaskStack& stack) {
    const auto [m0, n0] = nearest_orders(src, stack);
    const double k0 = src.k0();
    const double kx = m0 * 2.0 * kPi / stack.Lx;
    const double ky = stack.three_d() ? n0 * 2.0 * kPi / stack.Ly : 0.0;
    const double kt = std::hypot(kx, ky);
    if (!(kt < k0)) throw ConfigError("snap_incidence: snapped incidence is not a propagating wave");
    PlaneWaveSource out = src;
    out.theta = std::asin(kt / k0);
    if (kt > 0.0) out.phi = std::atan2(ky, kx);
    return out;
}

inline HarmonicGrid build_harmonics(const PlaneWaveSource& src, const MaskStack& stack, int Nx, int Ny) {
    if (Nx < 0 || Ny < 0) throw std::invalid_argument("build_harmonics: harmonic counts must be >= 0");
    if (!(src.wavelength > 0.0)) throw ConfigError("source: wavelength must be positive");
    if (!(stack.Lx > 0.0)) throw ConfigError("mask: Lx must be positive");
    if (!stack.three_d() && Ny != 0) throw ConfigError("2D stacks require Ny = 0");
    HarmonicGrid g;
    g.three_d = stack.three_d();
    g.k0 = src.k0();
    g.Lx = stack.Lx;
    g.Ly = stack.three_d() ? stack.Ly : 1.0;
    g.kappa_x = 2.0 * kPi / g.Lx;
    g.kappa_y = 2.0 * kPi / g.Ly;
    g.Nx = Nx;
    g.Ny = Ny;

    const double k0x = src.kx();
    const double k0y = src.ky();
    if (!(k0x * k0x + k0y * k0y < g.k0 * g.k0)) throw ConfigError("source: incident wave is not propagating");
    const auto [m0, n0] = nearest_orders(src, stack);
    const double miss_x = std::abs(k0x - g.kappa_x * m0);
    const double miss_y = stack.three_d() ? std::abs(k0y - g.kappa_y * n0) : std::abs(k0y);
    if (miss_x > kCommensurateTol * g.kappa_x || miss_y > kCommensurateTol * (stack.three_d() ? g.kappa_y : g.k0)) {
        std::ostringstream os;
        os << "source is not commensurate with the mask period: k0x/kappa_x = " << k0x / g.kappa_x
           << " (nearest order m0 = " << m0 << ")";
        if (stack.three_d()) os << ", k0y/kappa_y = " << k0y / g.kappa_y << " (nearest n0 = " << n0 << ")";
        if (!stack.three_d() && std::abs(k0y) > 0.0) os << ", 2D stacks need phi = 0";
        os << "; rerun with --snap-incidence to snap the angles to these orders";
        throw ConfigError(os.str());
    }
    if (std::abs(m0) > Nx || std::abs(n0) > Ny)
        throw ConfigError("incident order (" + std::to_string(m0) + "," + std::to_string(n0) +
                          ") lies outside the harmonic truncation");
    g.m0 = m0;
    g.n0 = n0;

    const int count = (2 * Nx + 1) * (2 * Ny + 1);
    g.m.resize(count);
    g.n.resize(count);
    g.kx.resize(count);
    g.ky.resize(count);
    g.kz.resize(count);
    for (int nn = -Ny; nn <= Ny; ++nn)
        for (int mm = -Nx; mm <= Nx; ++mm) {
            const int i = g.index(mm, nn);
            g.m[i] = mm;
            g.n[i] = nn;
            g.kx[i] = g.kappa_x * mm;
            g.ky[i] = stack.three_d() ? g.kappa_y * nn : 0.0;
            g.kz[i] = branch_sqrt(cplx{g.k0 * g.k0 - g.kx[i] * g.kx[i] - g.ky[i] * g.ky[i], 0.0});
        }
    return g;
}

/// Permittivity and its in-plane gradient at a point.
struct PatternSample {
    cplx eps;
    cplx deps_dx;
    cplx deps_dy;
};

/// Periodic representative of x in [-L/2, L/2).
inline double wrap_period(double x, double L) {
    double r = std::fmod(x + 0.5 * L, L);
    if (r < 0.0) r += L;
    return r - 0.5 * L;
}

inline PatternSample sample_pattern(const LayerPattern& pattern, double x, double y, double Lx, double Ly, bool three_d) {
    return std::visit(
        [&](const auto& p) -> PatternSample {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Uniform>) {
                return {p.eps, {}, {}};
            } else if constexpr (std::is_same_v<T, HoleInX>) {
                const double dx = wrap_period(x - p.center, Lx);
                const bool inside = p.width >= Lx || std::abs(dx) < 0.5 * p.width;
                return {inside ? p.eps_hole : p.eps_background, {}, {}};
            } else {
                const double xs = wrap_period(x, Lx);
                const double tp = std::tanh((xs + p.a) / p.d);
                const double tm = std::tanh((xs - p.a) / p.d);
                const double fx = tp - tm;
                const double dfx = ((1.0 - tp * tp) - (1.0 - tm * tm)) / p.d;
                double fy = 2.0;
                double dfy = 0.0;
                if (three_d) {
                    const double ys = wrap_period(y, Ly);
                    const double up = std::tanh((ys + p.b) / p.d);
                    const double um = std::tanh((ys - p.b) / p.d);
                    fy = up - um;
                    dfy = ((1.0 - up * up) - (1.0 - um * um)) / p.d;
                }
                const cplx contrast = 1.0 - p.eps;
                return {0.25 * fx * fy * contrast + p.eps, 0.25 * dfx * fy * contrast, 0.25 * fx * dfy * contrast};
            }
        },
        pattern);
}

/// Permittivity of layer j (0-based) at (x, y).
inline cplx permittivity_at(const MaskStack& stack, std::size_t j, double x, double y = 0.0) {
    if (j >= stack.layers.size()) throw std::out_of_range("permittivity_at: invalid layer index " + std::to_string(j));
    return sample_pattern(stack.layers[j].pattern, x, y, stack.Lx, stack.Ly, stack.three_d()).eps;
}

/// Fourier coefficients of eps and of the auxiliary functions used by the layer
/// operators, over the doubled range |m| <= 2Nx, |n| <= 2Ny.
struct PermittivityFourier {
    int layer = -1;
    FourierArray eps;
    FourierArray inv_eps;
    FourierArray grad_x;  // (1/eps) d eps / dx
    FourierArray grad_y;  // (1/eps) d eps / dy
    bool uniform = false;
    int quadrature_samples = 0;  // nodes along x, 0 when computed analytically
};

struct QuadratureOptions {
    int initial_factor = 8;
    int max_factor = 128;
    double tolerance = 1e-12;
};

namespace detail {

inline PermittivityFourier uniform_coeffs(cplx eps, int mx, int my) {
    PermittivityFourier pf;
    pf.eps = FourierArray(mx, my);
    pf.inv_eps = FourierArray(mx, my);
    pf.grad_x = FourierArray(mx, my);
    pf.grad_y = FourierArray(mx, my);
    pf.eps(0, 0) = eps;
    pf.inv_eps(0, 0) = 1.0 / eps;
    pf.uniform = true;
    return pf;
}

// (1/L) * integral over [c - w/2, c + w/2] of exp(i kappa m x).
inline cplx interval_coeff(int m, double kappa, double L, double c, double w) {
    if (m == 0) return cplx{w / L, 0.0};
    const double arg = kappa * m * 0.5 * w;
    return std::exp(kI * (kappa * m * c)) * (std::sin(arg) / (kPi * m));
}

inline double max_abs(const FourierArray& a) {
    double v = 0.0;
    for (const auto& c : a.data) v = std::max(v, std::abs(c));
    return v;
}

inline double rel_change(const FourierArray& a, const FourierArray& b) {
    const double scale = std::max(max_abs(a), 1e-300);
    double d = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) d = std::max(d, std::abs(a.data[i] - b.data[i]));
    return d / scale;
}

// Composite Gauss-Legendre quadrature over the unit cell, evaluated as a partial
// DFT for the requested orders only. Panels end on the cell edges, where the
// periodic extension of a tanh pad can have a small kink.
struct CellRule {
    std::vector<double> nodes;
    std::vector<double> weights;  // sum to 1
};

inline CellRule cell_rule(double L, int panels) {
    using rule = boost::math::quadrature::gauss<double, 16>;
    std::vector<double> ref_x, ref_w;
    const auto& ab = rule::abscissa();
    const auto& wt = rule::weights();
    for (std::size_t i = 0; i < ab.size(); ++i) {
        if (ab[i] == 0.0) {
            ref_x.push_back(0.0);
            ref_w.push_back(wt[i]);
            continue;
        }
        ref_x.push_back(-ab[i]);
        ref_w.push_back(wt[i]);
        ref_x.push_back(ab[i]);
        ref_w.push_back(wt[i]);
    }
    CellRule r;
    const double h = L / panels;
    for (int p = 0; p < panels; ++p) {
        const double mid = -0.5 * L + (p + 0.5) * h;
        for (std::size_t i = 0; i < ref_x.size(); ++i) {
            r.nodes.push_back(mid + 0.5 * h * ref_x[i]);
            r.weights.push_back(0.5 * ref_w[i] / panels);
        }
    }
    return r;
}

inline PermittivityFourier sampled_coeffs(const LayerPattern& pattern, const HarmonicGrid& g, int mx, int my,
                                          int panels_x, int panels_y) {
    const CellRule rx = cell_rule(g.Lx, panels_x);
    const CellRule ry = g.three_d ? cell_rule(g.Ly, panels_y) : CellRule{{0.0}, {1.0}};
    const std::size_t sx = rx.nodes.size();
    const std::size_t sy = ry.nodes.size();

    // w_i exp(i kappa m x_i) tables
    const int cx = 2 * mx + 1;
    const int cy = 2 * my + 1;
    std::vector<cplx> ex(std::size_t(cx) * sx), ey(std::size_t(cy) * sy);
    for (int m = -mx; m <= mx; ++m)
        for (std::size_t i = 0; i < sx; ++i)
            ex[std::size_t(m + mx) * sx + i] = rx.weights[i] * std::exp(kI * (g.kappa_x * m * rx.nodes[i]));
    for (int n = -my; n <= my; ++n)
        for (std::size_t i = 0; i < sy; ++i)
            ey[std::size_t(n + my) * sy + i] =
                g.three_d ? ry.weights[i] * std::exp(kI * (g.kappa_y * n * ry.nodes[i])) : cplx{1.0, 0.0};

    std::array<std::vector<cplx>, 4> rows;  // per function: [iy][m]
    for (auto& r : rows) r.assign(sy * cx, cplx{});
    std::vector<std::array<cplx, 4>> line(sx);
    for (std::size_t iy = 0; iy < sy; ++iy) {
        for (std::size_t ix = 0; ix < sx; ++ix) {
            const auto s = sample_pattern(pattern, rx.nodes[ix], ry.nodes[iy], g.Lx, g.Ly, g.three_d);
            const cplx inv = 1.0 / s.eps;
            line[ix] = {s.eps, inv, s.deps_dx * inv, s.deps_dy * inv};
        }
        for (int m = 0; m < cx; ++m) {
            std::array<cplx, 4> acc{};
            const cplx* e = &ex[std::size_t(m) * sx];
            for (std::size_t ix = 0; ix < sx; ++ix)
                for (int f = 0; f < 4; ++f) acc[f] += line[ix][f] * e[ix];
            for (int f = 0; f < 4; ++f) rows[f][iy * cx + m] = acc[f];
        }
    }
    PermittivityFourier pf;
    std::array<FourierArray*, 4> out{&pf.eps, &pf.inv_eps, &pf.grad_x, &pf.grad_y};
    for (int f = 0; f < 4; ++f) {
        *out[f] = FourierArray(mx, my);
        for (int n = -my; n <= my; ++n)
            for (int m = -mx; m <= mx; ++m) {
                cplx acc{};
                for (std::size_t iy = 0; iy < sy; ++iy) acc += rows[f][iy * cx + (m + mx)] * ey[std::size_t(n + my) * sy + iy];
                (*out[f])(m, n) = acc;
            }
    }
    pf.quadrature_samples = static_cast<int>(sx);
    return pf;
}

}  // namespace detail

inline PermittivityFourier fourier_coeffs(const LayerSpec& layer, const HarmonicGrid& g, int layer_index = -1,
                                          const QuadratureOptions& opts = {}) {
    const int mx = 2 * g.Nx;
    const int my = 2 * g.Ny;
    PermittivityFourier pf = std::visit(
        [&](const auto& p) -> PermittivityFourier {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Uniform>) {
                return detail::uniform_coeffs(p.eps, mx, my);
            } else if constexpr (std::is_same_v<T, HoleInX>) {
                if (p.width >= g.Lx) return detail::uniform_coeffs(p.eps_hole, mx, my);
                PermittivityFourier out;
                out.eps = FourierArray(mx, my);
                out.inv_eps = FourierArray(mx, my);
                out.grad_x = FourierArray(mx, my);
                out.grad_y = FourierArray(mx, my);
                const cplx jump = std::log(p.eps_hole) - std::log(p.eps_background);
                const double xl = p.center - 0.5 * p.width;
                const double xr = p.center + 0.5 * p.width;
                for (int m = -mx; m <= mx; ++m) {
                    const cplx frac = detail::interval_coeff(m, g.kappa_x, g.Lx, p.center, p.width);
                    const double delta = m == 0 ? 1.0 : 0.0;
                    out.eps(m, 0) = p.eps_background * delta + (p.eps_hole - p.eps_background) * frac;
                    out.inv_eps(m, 0) = 1.0 / p.eps_background * delta + (1.0 / p.eps_hole - 1.0 / p.eps_background) * frac;
                    // d(ln eps)/dx is a pair of delta functions at the hole edges.
                    out.grad_x(m, 0) = jump * (std::exp(kI * (g.kappa_x * m * xl)) - std::exp(kI * (g.kappa_x * m * xr))) / g.Lx;
                }
                return out;
            } else {
                // start near `initial_factor` nodes per resolved order, then double the panels
                const int px0 = std::max(4, opts.initial_factor * (2 * mx + 1) / 16 + 1);
                const int py0 = std::max(4, opts.initial_factor * (2 * my + 1) / 16 + 1);
                int factor = 1;
                PermittivityFourier prev = detail::sampled_coeffs(p, g, mx, my, px0, py0);
                while (factor * opts.initial_factor < opts.max_factor) {
                    factor *= 2;
                    PermittivityFourier next = detail::sampled_coeffs(p, g, mx, my, factor * px0, factor * py0);
                    const double change =
                        std::max({detail::rel_change(next.eps, prev.eps), detail::rel_change(next.inv_eps, prev.inv_eps),
                                  detail::rel_change(next.grad_x, prev.grad_x),
                                  g.three_d ? detail::rel_change(next.grad_y, prev.grad_y) : 0.0});
                    if (change <= opts.tolerance) return next;
                    prev = std::move(next);
                }
                throw NumericalError("fourier_coeffs: tanh pad quadrature did not converge within the oversampling cap");
            }
        },
        layer.pattern);
    pf.layer = layer_index;
    return pf;
}

}  // namespace euvwg
