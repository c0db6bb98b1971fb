#pragma once

// Named problem setups: the three analytic test problems (units with k0 = 1)
// and the EUV mask stacks at 13.5 nm and 11.2 nm.
//
// Mask period: the source does not pin Lx, so we take Lx = Ly = 128 nm at 13.5 nm
// and 108 nm at 11.2 nm. Either way 6 degree incidence lands next to order m0 = 1
// and is snapped onto it. Each Mo/Si bilayer is listed Mo first (top), Si below;
// the mirror sits on a Si half-space.

#include "euvwg/matching.hpp"

#include <filesystem>

namespace euvwg {

struct Preset {
    std::string name;
    MaskStack stack;
    PlaneWaveSource source;
    int Nx = 10;
    int Ny = 0;
    bool snap = false;
    SampleSpec window;  // default field sampling window
};

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"test1",       "test2",       "test3",       "mask2d_13.5",
                                                "mask2d_11.2", "mask3d_13.5", "mask3d_11.2"};
    return names;
}

/// Test problems: lambda = 2 pi (k0 = 1), 45 degrees, Lx = 2 pi / kx, domain
/// x in [-pi/kx, pi/kx], z in [-pi/kz, pi/kz] (test3: z from -2 pi/kz).
inline Preset test_problem(int which) {
    if (which < 1 || which > 3) throw ConfigError("test problem must be 1, 2 or 3");
    const double kx = std::sqrt(0.5);
    const double kz = std::sqrt(0.5);
    Preset p;
    p.name = "test" + std::to_string(which);
    p.source.wavelength = 2.0 * kPi;
    p.source.theta = kPi / 4.0;
    p.source.polarization = Polarization::TE;
    p.stack.Lx = 2.0 * kPi / kx;
    p.Nx = 10;
    if (which == 2) p.stack.substrate_eps = 4.0;
    if (which == 3) p.stack.layers.push_back({kPi / kz, Uniform{4.0}, "slab"});
    const double z_lo = which == 3 ? -2.0 * kPi / kz : -kPi / kz;
    p.window = {{-kPi / kx, kPi / kx, 101}, {0.0, 0.0, 1}, {z_lo, kPi / kz, 101}};
    return p;
}

inline std::string default_material_path() {
#ifdef EUVWG_DATA_DIR
    return std::string(EUVWG_DATA_DIR) + "/materials.csv";
#else
    return "data/materials.csv";
#endif
}

struct MaskOptions {
    double wavelength = 13.5;
    bool three_d = false;
    int bilayers = 31;
    double tabn_thickness = 60.0;
    int Nx = 10;
    int Ny = 0;
};

inline Preset mask_preset(const MaskOptions& o, const MaterialTable& mats) {
    const bool at135 = std::abs(o.wavelength - 13.5) < 1e-9;
    const bool at112 = std::abs(o.wavelength - 11.2) < 1e-9;
    if (!at135 && !at112) throw ConfigError("mask presets exist for 13.5 nm and 11.2 nm only");
    if (o.bilayers < 0) throw ConfigError("mask preset: bilayer count must be >= 0");
    const double L = at135 ? 128.0 : 108.0;
    const double t_mo = at135 ? 3.0 : 2.49;
    const double t_si = at135 ? 4.0 : 3.32;
    auto eps = [&](const std::string& name) { return mats.lookup(name, o.wavelength).permittivity(); };

    Preset p;
    std::ostringstream nm;
    nm << (o.three_d ? "mask3d_" : "mask2d_") << (at135 ? "13.5" : "11.2");
    p.name = nm.str();
    p.stack.Lx = L;
    p.stack.Ly = o.three_d ? L : 0.0;
    p.stack.dim = o.three_d ? Dimensionality::Three : Dimensionality::Two;
    auto absorber = [&](const std::string& m) -> LayerPattern {
        if (o.three_d) return TanhPad{eps(m), L / 4.0, L / 4.0, o.wavelength / 10.0};
        return HoleInX{eps(m), cplx{1.0, 0.0}, L / 2.0, 0.0};
    };
    p.stack.layers.push_back({10.0, absorber("TaBO"), "TaBO"});
    p.stack.layers.push_back({o.tabn_thickness, absorber("TaBN"), "TaBN"});
    p.stack.layers.push_back({2.0, Uniform{eps("Ru")}, "Ru"});
    for (int b = 0; b < o.bilayers; ++b) {
        p.stack.layers.push_back({t_mo, Uniform{eps("Mo")}, "Mo"});
        p.stack.layers.push_back({t_si, Uniform{eps("Si")}, "Si"});
    }
    p.stack.substrate_eps = eps("Si");
    p.source.wavelength = o.wavelength;
    p.source.theta = 6.0 * kPi / 180.0;
    p.source.polarization = o.three_d ? Polarization::Vector : Polarization::TE;
    p.source.h0 = {cplx{0.0, 0.0}, cplx{1.0, 0.0}};
    p.snap = true;
    p.source = snap_incidence(p.source, p.stack);
    p.Nx = o.Nx;
    p.Ny = o.three_d ? o.Ny : 0;
    const double top = 20.0;
    const double bottom = -(10.0 + o.tabn_thickness + 2.0 + 10.0);
    p.window = {{-L / 2, L / 2, 101}, {0.0, 0.0, 1}, {bottom, top, 101}};
    return p;
}

/// Resolves a preset by name; mask presets read optical constants from `materials`.
inline Preset make_preset(const std::string& name, const MaterialTable& materials) {
    if (name == "test1") return test_problem(1);
    if (name == "test2") return test_problem(2);
    if (name == "test3") return test_problem(3);
    MaskOptions o;
    if (name == "mask2d_13.5" || name == "mask2d_11.2") {
        o.wavelength = name.back() == '5' ? 13.5 : 11.2;
        return mask_preset(o, materials);
    }
    if (name == "mask3d_13.5" || name == "mask3d_11.2") {
        o.wavelength = name.back() == '5' ? 13.5 : 11.2;
        o.three_d = true;
        o.bilayers = 5;
        o.Nx = o.Ny = 3;
        return mask_preset(o, materials);
    }
    throw ConfigError("unknown preset '" + name + "'");
}

inline Preset make_preset(const std::string& name) {
    if (name.rfind("test", 0) == 0) return make_preset(name, MaterialTable{});
    return make_preset(name, MaterialTable::load(default_material_path()));
}

}  // namespace euvwg
