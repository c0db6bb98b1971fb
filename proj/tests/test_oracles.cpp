#include "euvwg/oracles.hpp"

#include <gtest/gtest.h>

using namespace euvwg;
using namespace euvwg::oracle;

TEST(Oracle, PlaneWave) {
    EXPECT_EQ(plane_wave_field(0.3, 0.9, 0.0, 0.0), cplx(1.0, 0.0));
    const cplx v = plane_wave_field(0.5, 0.5, 1.0, 2.0);
    EXPECT_NEAR(std::abs(v - std::exp(kI * 0.5)), 0.0, 1e-15);
}

TEST(Oracle, FresnelNormalAndBrewster) {
    const auto n = fresnel_rt(1.0, 4.0, 1.0, 0.0, Polarization::TE);
    EXPECT_NEAR(std::abs(n.r - (-1.0 / 3.0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(n.t - 2.0 / 3.0), 0.0, 1e-15);
    const double theta_b = std::atan(2.0);
    EXPECT_NEAR(std::abs(fresnel_rt(1.0, 4.0, 1.0, std::sin(theta_b), Polarization::TM).r), 0.0, 1e-15);
    const auto te45 = fresnel_rt(1.0, 4.0, 1.0, std::sqrt(0.5), Polarization::TE);
    EXPECT_NEAR(te45.r.real(), -0.4514162296, 1e-9);
    EXPECT_NEAR(std::sqrt(4.0 - 0.5), 1.8708286933869707, 1e-15);
}

TEST(Oracle, SingleLayerMatchesAiryFormula) {
    const double k0 = 1.3, kx = 0.4, d = 2.7;
    const cplx e2{3.0, -0.4}, e3{2.0, 0.0};
    for (auto pol : {Polarization::TE, Polarization::TM}) {
        const auto s = tmm_multilayer({{e2, d}}, 1.0, e3, k0, kx, pol);
        const auto f12 = fresnel_rt(1.0, e2, k0, kx, pol);
        const auto f23 = fresnel_rt(e2, e3, k0, kx, pol);
        const cplx k2 = branch_sqrt(k0 * k0 * e2 - kx * kx);
        const cplx ph = std::exp(-2.0 * kI * k2 * d);
        const cplx r = (f12.r + f23.r * ph) / (1.0 + f12.r * f23.r * ph);
        EXPECT_NEAR(std::abs(s.r - r), 0.0, 1e-14);
    }
}

TEST(Oracle, TransferMatrixContinuityAndEnergy) {
    const double k0 = 1.0, kx = 0.6;
    const std::vector<UniformLayer> layers{{2.0, 1.1}, {3.5, 0.4}, {1.3, 2.2}};
    const auto s = tmm_multilayer(layers, 1.0, 2.5, k0, kx, Polarization::TE);
    for (double z : s.interfaces) {
        EXPECT_NEAR(std::abs(s.profile(z + 1e-12) - s.profile(z - 1e-12)), 0.0, 1e-10);
        EXPECT_NEAR(std::abs(s.profile_dz(z + 1e-12) - s.profile_dz(z - 1e-12)), 0.0, 1e-10);
    }
    const double kz0 = std::sqrt(k0 * k0 - kx * kx);
    const double kzs = std::sqrt(2.5 - kx * kx);
    EXPECT_NEAR(std::norm(s.r) + kzs / kz0 * std::norm(s.t), 1.0, 1e-13);
    // above the stack: incident plus reflected
    EXPECT_NEAR(std::abs(s.profile(1.7) - (std::exp(kI * kz0 * 1.7) + s.r * std::exp(-kI * kz0 * 1.7))), 0.0, 1e-14);
}

TEST(Oracle, ThickAbsorberStaysFinite) {
    const auto s = tmm_multilayer({{cplx{1.0, -2.0}, 400.0}}, 1.0, 1.0, 1.0, 0.2, Polarization::TM);
    EXPECT_TRUE(std::isfinite(std::abs(s.r)));
    EXPECT_LT(std::abs(s.t), 1e-100);
}

TEST(Oracle, FiniteDifferenceConvergesToTransferMatrix) {
    const double k0 = 1.0, kx = std::sqrt(0.5), kz = std::sqrt(0.5);
    const std::vector<UniformLayer> layers{{cplx{4.0, -0.1}, kPi / kz}};
    const auto tmm = tmm_multilayer(layers, 1.0, 1.0, k0, kx, Polarization::TE);
    const double z_min = -2.0 * kPi / kz, z_max = kPi / kz;
    auto error = [&](int points) {
        const auto e = fd_helmholtz(layers, 1.0, 1.0, k0, kx, z_min, z_max, points);
        double num = 0.0, den = 0.0;
        for (int i = 0; i < points; ++i) {
            const cplx ref = tmm.profile(z_min + (z_max - z_min) * i / (points - 1));
            num += std::norm(e[std::size_t(i)] - ref);
            den += std::norm(ref);
        }
        return std::sqrt(num / den);
    };
    // grid nodes on both interfaces: 3 intervals of pi/kz each
    const double e1 = error(3 * 400 + 1);
    const double e2 = error(3 * 800 + 1);
    EXPECT_LT(e2, 1e-4);
    EXPECT_NEAR(e1 / e2, 4.0, 0.4);
}
