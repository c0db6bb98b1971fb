#include "euvwg/geometry.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace euvwg;

namespace {

// Independent oracle: adaptive Gauss-Kronrod on (1/L) * int f(x) exp(i kappa m x) dx,
// split at the pad edges where the integrand varies fastest.
template <typename F>
cplx gk_coeff(F f, double L, int m, std::vector<double> breaks) {
    using boost::math::quadrature::gauss_kronrod;
    const double kappa = 2.0 * kPi / L;
    breaks.insert(breaks.begin(), -0.5 * L);
    breaks.push_back(0.5 * L);
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        re += gauss_kronrod<double, 61>::integrate(
            [&](double x) { return (f(x) * std::exp(kI * (kappa * m * x))).real(); }, breaks[i], breaks[i + 1], 12, 1e-13);
        im += gauss_kronrod<double, 61>::integrate(
            [&](double x) { return (f(x) * std::exp(kI * (kappa * m * x))).imag(); }, breaks[i], breaks[i + 1], 12, 1e-13);
    }
    return cplx{re, im} / L;
}

MaskStack stack_2d(double L, LayerPattern p) {
    MaskStack s;
    s.Lx = L;
    s.layers.push_back({10.0, p, "test"});
    return s;
}

HarmonicGrid grid_for(const MaskStack& s, int nx, int ny = 0, double wavelength = 13.5) {
    PlaneWaveSource src;
    src.wavelength = wavelength;
    return build_harmonics(src, s, nx, ny);
}

}  // namespace

TEST(Permittivity, FromNk) {
    EXPECT_EQ(permittivity_from_nk(1.0, 0.0), cplx(1.0, 0.0));
    EXPECT_EQ(permittivity_from_nk(2.0, 0.0), cplx(4.0, 0.0));
    const cplx e = permittivity_from_nk(0.92, 0.04);
    EXPECT_NEAR(e.real(), 0.8448, 1e-15);
    EXPECT_NEAR(e.imag(), -0.0736, 1e-15);
}

TEST(Permittivity, AbsorbingMediaHaveNonPositiveImaginaryPart) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> n(0.5, 2.0), k(0.0, 0.5);
    for (int i = 0; i < 1000; ++i) EXPECT_LE(permittivity_from_nk(n(rng), k(rng)).imag(), 0.0);
}

TEST(Permittivity, PointEvaluation) {
    MaskStack s = stack_2d(128.0, Uniform{cplx{4.0, 0.0}});
    EXPECT_EQ(permittivity_at(s, 0, 17.0), cplx(4.0, 0.0));
    EXPECT_THROW(permittivity_at(s, 1, 0.0), std::out_of_range);

    const cplx ea{0.9, -0.05};
    MaskStack pad;
    pad.dim = Dimensionality::Three;
    pad.Lx = pad.Ly = 128.0;
    pad.layers.push_back({60.0, TanhPad{ea, 32.0, 32.0, 1.35}, "pad"});
    EXPECT_NEAR(std::abs(permittivity_at(pad, 0, 0.0, 0.0) - 1.0), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(permittivity_at(pad, 0, 60.0, 0.0) - ea), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(permittivity_at(pad, 0, 0.0, -60.0) - ea), 0.0, 1e-12);

    MaskStack hole = stack_2d(100.0, HoleInX{ea, cplx{1.0, 0.0}, 50.0, 0.0});
    EXPECT_EQ(permittivity_at(hole, 0, 10.0), cplx(1.0, 0.0));
    EXPECT_EQ(permittivity_at(hole, 0, 30.0), ea);
    EXPECT_EQ(permittivity_at(hole, 0, 30.0 - 100.0), ea);
}

TEST(Harmonics, FreeSpaceKzAndBranch) {
    // k0 = 1 (wavelength 2 pi), kappa_x = 0.5 (Lx = 4 pi)
    MaskStack s;
    s.Lx = 4.0 * kPi;
    PlaneWaveSource src;
    src.wavelength = 2.0 * kPi;
    const auto g = build_harmonics(src, s, 3, 0);
    EXPECT_NEAR(std::abs(g.kz[g.index(0, 0)] - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(g.kz[g.index(1, 0)] - 0.8660254037844386), 0.0, 1e-15);
    const cplx k3 = g.kz[g.index(3, 0)];
    EXPECT_EQ(k3.real(), 0.0);
    EXPECT_NEAR(k3.imag(), -1.118033988749895, 1e-15);
    EXPECT_EQ(g.incident_index(), g.index(0, 0));
}

TEST(Harmonics, BranchInvariantRandomized) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.05, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        MaskStack s;
        s.dim = Dimensionality::Three;
        s.Lx = u(rng) * 10.0;
        s.Ly = u(rng) * 10.0;
        PlaneWaveSource src;
        src.wavelength = u(rng) * 5.0;
        const auto g = build_harmonics(src, s, 4, 3);
        for (int i = 0; i < g.size(); ++i) {
            const cplx k = g.kz[i];
            EXPECT_GE(k.real(), 0.0);
            if (k.real() == 0.0) {
                EXPECT_LE(k.imag(), 0.0);
            }
            const cplx k2 = g.k0 * g.k0 - g.kx[i] * g.kx[i] - g.ky[i] * g.ky[i];
            EXPECT_NEAR(std::abs(k * k - k2), 0.0, 1e-12 * std::max(1.0, std::abs(k2)));
        }
    }
}

TEST(Harmonics, RejectsNonCommensurateSourceAndSnaps) {
    MaskStack s;
    s.Lx = 128.0;
    PlaneWaveSource src;
    src.wavelength = 13.5;
    src.theta = 6.0 * kPi / 180.0;
    try {
        build_harmonics(src, s, 5, 0);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("m0 = 1"), std::string::npos) << msg;
        EXPECT_NE(msg.find("snap"), std::string::npos) << msg;
    }
    const auto snapped = snap_incidence(src, s);
    const auto g = build_harmonics(snapped, s, 5, 0);
    EXPECT_EQ(g.m0, 1);
    EXPECT_NEAR(snapped.kx(), g.kappa_x, 1e-12 * g.kappa_x);
}

TEST(Fourier, UniformLayer) {
    MaskStack s = stack_2d(100.0, Uniform{cplx{4.0, 0.0}});
    const auto pf = fourier_coeffs(s.layers[0], grid_for(s, 3));
    EXPECT_EQ(pf.eps(0, 0), cplx(4.0, 0.0));
    EXPECT_EQ(pf.inv_eps(0, 0), cplx(0.25, 0.0));
    for (int m = -6; m <= 6; ++m)
        if (m != 0) {
            EXPECT_EQ(pf.eps(m, 0), cplx(0.0, 0.0));
            EXPECT_EQ(pf.grad_x(m, 0), cplx(0.0, 0.0));
        }
}

TEST(Fourier, HoleClosedForm) {
    const cplx ea{0.8, -0.06};
    const double L = 100.0;
    MaskStack s = stack_2d(L, HoleInX{ea, cplx{1.0, 0.0}, L / 2, 0.0});
    const auto pf = fourier_coeffs(s.layers[0], grid_for(s, 4));
    EXPECT_NEAR(std::abs(pf.eps(0, 0) - (ea + 1.0) / 2.0), 0.0, 1e-15);
    for (int m = 1; m <= 8; ++m) {
        const cplx expect = (1.0 - ea) * std::sin(kPi * m / 2.0) / (kPi * m);
        EXPECT_NEAR(std::abs(pf.eps(m, 0) - expect), 0.0, 1e-15) << m;
        EXPECT_NEAR(std::abs(pf.eps(-m, 0) - expect), 0.0, 1e-15) << m;
    }
    EXPECT_NEAR(std::abs(pf.eps(2, 0)), 0.0, 1e-16);

    // an off-centre hole, checked against the quadrature oracle
    MaskStack off = stack_2d(L, HoleInX{ea, cplx{2.0, 0.0}, 30.0, 12.0});
    const auto po = fourier_coeffs(off.layers[0], grid_for(off, 4));
    for (int m = -8; m <= 8; ++m) {
        const cplx ref = gk_coeff([&](double x) { return permittivity_at(off, 0, x); }, L, m, {-3.0, 27.0});
        EXPECT_NEAR(std::abs(po.eps(m, 0) - ref), 0.0, 1e-12) << m;
        const cplx ref_inv = gk_coeff([&](double x) { return 1.0 / permittivity_at(off, 0, x); }, L, m, {-3.0, 27.0});
        EXPECT_NEAR(std::abs(po.inv_eps(m, 0) - ref_inv), 0.0, 1e-12) << m;
    }
}

TEST(Fourier, TanhPadMatchesQuadratureOracle2D) {
    const double L = 128.0;
    const TanhPad pad{cplx{0.88, -0.06}, 32.0, 32.0, 1.35};
    MaskStack s = stack_2d(L, pad);
    const auto pf = fourier_coeffs(s.layers[0], grid_for(s, 6));
    const std::vector<double> breaks{-32.0, 32.0};
    for (int m = -12; m <= 12; ++m) {
        auto eps = [&](double x) { return sample_pattern(pad, x, 0.0, L, L, false).eps; };
        auto gx = [&](double x) {
            const auto sp = sample_pattern(pad, x, 0.0, L, L, false);
            return sp.deps_dx / sp.eps;
        };
        const cplx re = gk_coeff(eps, L, m, breaks);
        const cplx ri = gk_coeff([&](double x) { return 1.0 / eps(x); }, L, m, breaks);
        const cplx rg = gk_coeff(gx, L, m, breaks);
        EXPECT_LE(std::abs(pf.eps(m, 0) - re), 1e-10 * std::max(std::abs(re), std::abs(pf.eps(0, 0)) * 1e-3)) << m;
        EXPECT_LE(std::abs(pf.inv_eps(m, 0) - ri), 1e-10 * std::max(std::abs(ri), std::abs(pf.inv_eps(0, 0)) * 1e-3)) << m;
        EXPECT_LE(std::abs(pf.grad_x(m, 0) - rg), 1e-10 * std::max(std::abs(rg), 1e-3)) << m;
    }
}

TEST(Fourier, TanhPadMatchesQuadratureOracle3D) {
    const double L = 128.0;
    const TanhPad pad{cplx{0.9, -0.04}, 32.0, 32.0, 1.35};
    MaskStack s;
    s.dim = Dimensionality::Three;
    s.Lx = s.Ly = L;
    s.layers.push_back({10.0, pad, "pad"});
    const auto g = grid_for(s, 2, 2);
    const auto pf = fourier_coeffs(s.layers[0], g);
    // eps is separable: 1/4 (1 - eps) F_m G_n + eps delta_m0 delta_n0
    auto fx = [&](double x) { return cplx{std::tanh((x + pad.a) / pad.d) - std::tanh((x - pad.a) / pad.d), 0.0}; };
    const std::vector<double> breaks{-32.0, 32.0};
    for (int m = -4; m <= 4; ++m)
        for (int n = -4; n <= 4; ++n) {
            cplx ref = 0.25 * (1.0 - pad.eps) * gk_coeff(fx, L, m, breaks) * gk_coeff(fx, L, n, breaks);
            if (m == 0 && n == 0) ref += pad.eps;
            EXPECT_LE(std::abs(pf.eps(m, n) - ref), 1e-10 * std::max(std::abs(ref), 1e-3)) << m << ',' << n;
        }
    // 1/eps is not separable: nested quadrature for a few orders
    for (auto [m, n] : std::vector<std::pair<int, int>>{{0, 0}, {1, 0}, {1, 2}, {-3, 1}}) {
        auto row = [&](double y) {
            return gk_coeff([&](double x) { return 1.0 / sample_pattern(pad, x, y, L, L, true).eps; }, L, m, breaks);
        };
        const cplx ref = gk_coeff(row, L, n, breaks);
        EXPECT_LE(std::abs(pf.inv_eps(m, n) - ref), 1e-10 * std::max(std::abs(ref), 1e-3)) << m << ',' << n;
    }
}

TEST(Fourier, ConjugateSymmetryForRealPatterns) {
    const double L = 90.0;
    for (const LayerPattern& p : {LayerPattern{HoleInX{cplx{3.0, 0.0}, cplx{1.5, 0.0}, 20.0, 7.0}},
                                  LayerPattern{TanhPad{cplx{2.5, 0.0}, 20.0, 15.0, 3.0}}}) {
        MaskStack s;
        s.dim = Dimensionality::Three;
        s.Lx = s.Ly = L;
        s.layers.push_back({5.0, p, ""});
        const auto pf = fourier_coeffs(s.layers[0], grid_for(s, 3, 3));
        for (int m = -6; m <= 6; ++m)
            for (int n = -6; n <= 6; ++n) {
                EXPECT_NEAR(std::abs(pf.eps(-m, -n) - std::conj(pf.eps(m, n))), 0.0, 1e-14);
                EXPECT_NEAR(std::abs(pf.inv_eps(-m, -n) - std::conj(pf.inv_eps(m, n))), 0.0, 1e-14);
            }
    }
    // a lossy pattern breaks the symmetry
    MaskStack lossy = stack_2d(L, HoleInX{cplx{3.0, -0.5}, cplx{1.0, 0.0}, 20.0, 7.0});
    const auto pl = fourier_coeffs(lossy.layers[0], grid_for(lossy, 2));
    EXPECT_GT(std::abs(pl.eps(1, 0) - std::conj(pl.eps(-1, 0))), 1e-3);
}

TEST(Fourier, ParsevalBoundIsMonotone) {
    const double L = 100.0;
    const cplx eb{3.0, -0.2}, eh{1.0, 0.0};
    const double w = 37.0;
    const double full = (w / L) * std::norm(eh) + (1.0 - w / L) * std::norm(eb);
    MaskStack s = stack_2d(L, HoleInX{eb, eh, w, 4.0});
    double prev = 0.0;
    for (int nx = 0; nx <= 40; nx += 5) {
        const auto pf = fourier_coeffs(s.layers[0], grid_for(s, nx));
        double sum = 0.0;
        for (int m = -nx; m <= nx; ++m) sum += std::norm(pf.eps(m, 0));
        EXPECT_LE(sum, full + 1e-12);
        EXPECT_GE(sum, prev);
        prev = sum;
    }
    EXPECT_GT(prev, 0.99 * full);
}

TEST(Fourier, SynthesisReconstructsSmoothPad) {
    const double L = 100.0;
    const TanhPad pad{cplx{2.0, -0.3}, 25.0, 25.0, 5.0};
    MaskStack s = stack_2d(L, pad);
    const int nx = 32;
    const auto g = grid_for(s, nx / 2);  // coefficient range covers |m| <= 32
    const auto pf = fourier_coeffs(s.layers[0], g);
    ASSERT_GE(pf.eps.max_m, nx);
    double worst = 0.0;
    for (double x : {-40.0, -10.0, 0.0, 3.0, 12.5, 45.0}) {
        cplx v{};
        for (int m = -nx; m <= nx; ++m) v += pf.eps(m, 0) * std::exp(-kI * (g.kappa_x * m * x));
        worst = std::max(worst, std::abs(v - permittivity_at(s, 0, x)));
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(Materials, CsvParsingAndInterpolation) {
    std::istringstream in(
        "# comment\nname,wavelength_nm,n,k\nMo,13.5,0.92,0.006\nMo,11.2,0.94,0.004\nSi,13.5,0.999,0.0018\n");
    const auto t = MaterialTable::parse(in);
    EXPECT_TRUE(t.has("Mo"));
    EXPECT_DOUBLE_EQ(t.lookup("Mo", 13.5).n, 0.92);
    EXPECT_NEAR(t.lookup("Mo", 12.35).n, 0.93, 1e-12);
    EXPECT_THROW(t.lookup("Ru", 13.5), ConfigError);
    EXPECT_THROW(t.lookup("Si", 11.2), ConfigError);

    std::istringstream bad("name,wavelength,n,k\nMo,13.5,0.9,0.1\n");
    EXPECT_THROW(MaterialTable::parse(bad), ConfigError);
    std::istringstream neg("name,wavelength_nm,n,k\nMo,13.5,0.9,-0.1\n");
    EXPECT_THROW(MaterialTable::parse(neg), ConfigError);
}

TEST(MaskStackTest, ThicknessAndValidation) {
    MaskStack s;
    s.Lx = 50.0;
    s.layers = {{10.0, Uniform{}, ""}, {2.5, Uniform{}, ""}, {7.5, Uniform{}, ""}};
    EXPECT_DOUBLE_EQ(s.total_thickness(), 20.0);
    EXPECT_DOUBLE_EQ(s.interface_z(2), -12.5);
    EXPECT_NO_THROW(s.validate());
    s.layers[1].thickness = 0.0;
    EXPECT_THROW(s.validate(), ConfigError);
    s.layers[1] = {1.0, HoleInX{cplx{2.0, 0.0}, cplx{1.0, 0.0}, 60.0, 0.0}, ""};
    EXPECT_THROW(s.validate(), ConfigError);
}
