#pragma once

// Run configuration: one JSON document per run; unknown keys are errors.
//
//   {
//     "mode": "solve",                 optional; the command line wins
//     "mask": "mask2d_13.5" | {inline stack},
//     "mask_options": {"bilayers": 31, "tabn_thickness": 60},   mask presets only
//     "materials": "data/materials.csv",
//     "source": {"wavelength": 13.5, "theta_deg": 6, "phi_deg": 0, "polarization": "TE",
//                "h0": [[0, 0], [1, 0]]},
//     "Nx": 10, "Ny": 0,
//     "grid": {"x": {"lo": -64, "hi": 64, "count": 101}, "y": {...}, "z": {...}},
//     "snap_incidence": false,
//     "seeds": 7 | [0, 1, 2],
//     "output": "out",
//     "checkpoint": "out/wgno_seed0.json",
//     "wgno": {...}, "pinn": {...}
//   }
//
// Inline stack: {"Lx": 128, "Ly": 0, "dim": 2, "substrate": <eps>, "layers": [
//   {"thickness": 10, "label": "absorber", "pattern": {"type": "uniform", "eps": <eps>}},
//   {"thickness": 60, "pattern": {"type": "hole", "background": <eps>, "hole": <eps>, "width": 64, "center": 0}},
//   {"thickness": 60, "pattern": {"type": "tanh_pad", "eps": <eps>, "a": 32, "b": 32, "d": 1.35}}]}
// <eps> is [re, im], {"n": .., "k": ..} or a material name looked up at the source wavelength.

#include "euvwg/io.hpp"
#include "euvwg/presets.hpp"

#include <optional>
#include <set>

namespace euvwg {

struct WgnoFamilyConfig {
    std::vector<double> hole_widths;  // absorber hole widths of the training pool
    int batch = 4;
};

struct RunConfig {
    std::string mode;
    std::string preset;     // empty for inline stacks
    json inline_mask;       // set when preset is empty
    std::optional<int> bilayers;
    std::optional<double> tabn_thickness;
    std::string materials;
    json source;            // overrides, may be null
    std::optional<int> Nx, Ny;
    json grid;              // overrides, may be null
    bool snap_incidence = false;
    std::vector<std::uint64_t> seeds;  // empty: trainer default
    std::string output = "out";
    std::string checkpoint;
    WgnoConfig wgno;
    std::optional<WgnoFamilyConfig> family;
    PinnConfig pinn;
    json document;  // the parsed input, for the echo
};

namespace detail {

inline void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <typename T>
T get_as(const json& j, const std::string& where) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + ": wrong value type");
    }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out, const std::string& where) {
    if (j.contains(key)) out = get_as<T>(j.at(key), where + "." + key);
}

inline std::vector<std::uint64_t> parse_seeds(const json& j, const std::string& where) {
    std::vector<std::uint64_t> s;
    if (j.is_number_integer()) {
        const auto k = j.get<long long>();
        if (k <= 0) throw ConfigError(where + ": seed count must be > 0");
        for (long long i = 0; i < k; ++i) s.push_back(std::uint64_t(i));
    } else if (j.is_array()) {
        for (const auto& v : j) {
            if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(where + ": seeds must be non-negative integers");
            s.push_back(v.get<std::uint64_t>());
        }
        if (s.empty()) throw ConfigError(where + ": empty seed list");
    } else {
        throw ConfigError(where + ": seeds must be a count or a list");
    }
    return s;
}

inline cplx parse_eps(const json& j, const MaterialTable& mats, double wavelength, const std::string& where) {
    if (j.is_array()) {
        if (j.size() != 2 || !j[0].is_number() || !j[1].is_number()) throw ConfigError(where + ": expected [re, im]");
        return {j[0].get<double>(), j[1].get<double>()};
    }
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_object()) {
        allow_keys(j, {"n", "k"}, where);
        return permittivity_from_nk(get_as<double>(j.at("n"), where + ".n"), j.contains("k") ? get_as<double>(j.at("k"), where + ".k") : 0.0);
    }
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (!mats.has(name)) throw ConfigError(where + ": unknown material '" + name + "'");
        return mats.lookup(name, wavelength).permittivity();
    }
    throw ConfigError(where + ": expected a permittivity");
}

inline Polarization parse_polarization(const std::string& s, const std::string& where) {
    if (s == "TE") return Polarization::TE;
    if (s == "TM") return Polarization::TM;
    if (s == "vector" || s == "Vector") return Polarization::Vector;
    throw ConfigError(where + ": polarization must be TE, TM or vector");
}

inline void apply_axis(const json& j, Axis& a, const std::string& where) {
    allow_keys(j, {"lo", "hi", "count"}, where);
    read_opt(j, "lo", a.lo, where);
    read_opt(j, "hi", a.hi, where);
    read_opt(j, "count", a.count, where);
    if (a.count < 1 || (a.count > 1 && !(a.hi > a.lo))) throw ConfigError(where + ": need count >= 1 and hi > lo");
}

inline void apply_source(const json& j, PlaneWaveSource& s, const std::string& where) {
    allow_keys(j, {"wavelength", "theta_deg", "phi_deg", "polarization", "h0"}, where);
    read_opt(j, "wavelength", s.wavelength, where);
    if (j.contains("theta_deg")) s.theta = get_as<double>(j.at("theta_deg"), where + ".theta_deg") * kPi / 180.0;
    if (j.contains("phi_deg")) s.phi = get_as<double>(j.at("phi_deg"), where + ".phi_deg") * kPi / 180.0;
    if (j.contains("polarization")) s.polarization = parse_polarization(get_as<std::string>(j.at("polarization"), where), where);
    if (j.contains("h0")) {
        const auto& h = j.at("h0");
        if (!h.is_array() || h.size() != 2) throw ConfigError(where + ".h0: expected [[re, im], [re, im]]");
        for (int i = 0; i < 2; ++i) s.h0[std::size_t(i)] = parse_eps(h[std::size_t(i)], MaterialTable{}, 0.0, where + ".h0");
    }
    if (!(s.wavelength > 0.0)) throw ConfigError(where + ": wavelength must be > 0");
    if (!(s.theta >= 0.0 && s.theta < kPi / 2)) throw ConfigError(where + ": theta must lie in [0, 90) degrees");
}

inline MaskStack parse_inline_mask(const json& j, const MaterialTable& mats, double wavelength) {
    const std::string w = "mask";
    allow_keys(j, {"Lx", "Ly", "dim", "substrate", "layers"}, w);
    MaskStack m;
    m.Lx = get_as<double>(j.at("Lx"), w + ".Lx");
    read_opt(j, "Ly", m.Ly, w);
    int dim = 2;
    read_opt(j, "dim", dim, w);
    if (dim != 2 && dim != 3) throw ConfigError("mask.dim must be 2 or 3");
    m.dim = dim == 3 ? Dimensionality::Three : Dimensionality::Two;
    if (j.contains("substrate")) m.substrate_eps = parse_eps(j.at("substrate"), mats, wavelength, w + ".substrate");
    const auto& layers = j.contains("layers") ? j.at("layers") : json::array();
    if (!layers.is_array()) throw ConfigError("mask.layers must be an array");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string lw = "mask.layers[" + std::to_string(i) + "]";
        const auto& L = layers[i];
        allow_keys(L, {"thickness", "label", "pattern"}, lw);
        LayerSpec spec;
        spec.thickness = get_as<double>(L.at("thickness"), lw + ".thickness");
        read_opt(L, "label", spec.label, lw);
        const auto& p = L.at("pattern");
        const std::string pw = lw + ".pattern";
        const auto type = get_as<std::string>(p.at("type"), pw + ".type");
        if (type == "uniform") {
            allow_keys(p, {"type", "eps"}, pw);
            spec.pattern = Uniform{parse_eps(p.at("eps"), mats, wavelength, pw + ".eps")};
        } else if (type == "hole") {
            allow_keys(p, {"type", "background", "hole", "width", "center"}, pw);
            HoleInX h;
            h.eps_background = parse_eps(p.at("background"), mats, wavelength, pw + ".background");
            if (p.contains("hole")) h.eps_hole = parse_eps(p.at("hole"), mats, wavelength, pw + ".hole");
            h.width = get_as<double>(p.at("width"), pw + ".width");
            read_opt(p, "center", h.center, pw);
            spec.pattern = h;
        } else if (type == "tanh_pad") {
            allow_keys(p, {"type", "eps", "a", "b", "d"}, pw);
            TanhPad t;
            t.eps = parse_eps(p.at("eps"), mats, wavelength, pw + ".eps");
            t.a = get_as<double>(p.at("a"), pw + ".a");
            read_opt(p, "b", t.b, pw);
            t.d = get_as<double>(p.at("d"), pw + ".d");
            spec.pattern = t;
        } else {
            throw ConfigError(pw + ".type must be uniform, hole or tanh_pad");
        }
        m.layers.push_back(std::move(spec));
    }
    m.validate();
    return m;
}

inline void parse_wgno(const json& j, WgnoConfig& c, std::optional<WgnoFamilyConfig>& fam) {
    const std::string w = "wgno";
    allow_keys(j, {"hidden_width", "hidden_layers", "epochs_stage1", "epochs_stage2", "lr_stage1", "lr_stage2", "beta1", "beta2",
                   "adam_eps", "column_scaling", "family"},
               w);
    read_opt(j, "hidden_width", c.hidden_width, w);
    read_opt(j, "hidden_layers", c.hidden_layers, w);
    read_opt(j, "epochs_stage1", c.epochs_stage1, w);
    read_opt(j, "epochs_stage2", c.epochs_stage2, w);
    read_opt(j, "lr_stage1", c.lr_stage1, w);
    read_opt(j, "lr_stage2", c.lr_stage2, w);
    read_opt(j, "beta1", c.adam.beta1, w);
    read_opt(j, "beta2", c.adam.beta2, w);
    read_opt(j, "adam_eps", c.adam.eps, w);
    read_opt(j, "column_scaling", c.column_scaling, w);
    if (j.contains("family")) {
        const auto& f = j.at("family");
        allow_keys(f, {"hole_widths", "batch"}, "wgno.family");
        WgnoFamilyConfig fc;
        fc.hole_widths = get_as<std::vector<double>>(f.at("hole_widths"), "wgno.family.hole_widths");
        read_opt(f, "batch", fc.batch, "wgno.family");
        if (fc.hole_widths.empty() || fc.batch <= 0) throw ConfigError("wgno.family: need hole widths and batch > 0");
        fam = fc;
    }
    c.validate();
}

inline void parse_pinn(const json& j, PinnConfig& c) {
    const std::string w = "pinn";
    allow_keys(j, {"hidden_width", "hidden_layers", "lambda_bc", "lambda_r", "intervals_x", "intervals_z", "boundary_points",
                   "boundary_harmonics", "interface_band", "adam_epochs", "adam_lr", "beta1", "beta2", "adam_eps", "lbfgs_epochs",
                   "lbfgs_iterations_per_epoch", "lbfgs_history", "wolfe_c1", "wolfe_c2", "max_line_search_steps", "threads", "max_seconds"},
               w);
    read_opt(j, "hidden_width", c.hidden_width, w);
    read_opt(j, "hidden_layers", c.hidden_layers, w);
    read_opt(j, "lambda_bc", c.lambda_bc, w);
    read_opt(j, "lambda_r", c.lambda_r, w);
    read_opt(j, "intervals_x", c.intervals_x, w);
    read_opt(j, "intervals_z", c.intervals_z, w);
    read_opt(j, "boundary_points", c.boundary_points, w);
    read_opt(j, "boundary_harmonics", c.boundary_harmonics, w);
    read_opt(j, "interface_band", c.interface_band, w);
    read_opt(j, "adam_epochs", c.adam_epochs, w);
    read_opt(j, "adam_lr", c.adam_lr, w);
    read_opt(j, "beta1", c.adam.beta1, w);
    read_opt(j, "beta2", c.adam.beta2, w);
    read_opt(j, "adam_eps", c.adam.eps, w);
    read_opt(j, "lbfgs_epochs", c.lbfgs_epochs, w);
    read_opt(j, "lbfgs_iterations_per_epoch", c.lbfgs_iterations_per_epoch, w);
    read_opt(j, "max_seconds", c.max_seconds, w);
    read_opt(j, "lbfgs_history", c.lbfgs_history, w);
    read_opt(j, "wolfe_c1", c.wolfe_c1, w);
    read_opt(j, "wolfe_c2", c.wolfe_c2, w);
    read_opt(j, "max_line_search_steps", c.max_line_search_steps, w);
    read_opt(j, "threads", c.threads, w);
    c.validate();
}

}  // namespace detail

inline RunConfig parse_run_config(const json& j) {
    detail::allow_keys(j, {"mode", "mask", "mask_options", "materials", "source", "Nx", "Ny", "grid", "snap_incidence", "seeds", "output",
                           "checkpoint", "wgno", "pinn"},
                       "config");
    RunConfig c;
    c.document = j;
    detail::read_opt(j, "mode", c.mode, "config");
    if (!j.contains("mask")) throw ConfigError("config: 'mask' is required");
    const auto& m = j.at("mask");
    if (m.is_string()) {
        c.preset = m.get<std::string>();
        const auto& names = preset_names();
        if (std::find(names.begin(), names.end(), c.preset) == names.end()) throw ConfigError("config: unknown preset '" + c.preset + "'");
    } else if (m.is_object()) {
        c.inline_mask = m;
        if (!j.contains("source") || !j.at("source").contains("wavelength"))
            throw ConfigError("config: inline masks need source.wavelength");
    } else {
        throw ConfigError("config: 'mask' must be a preset name or an object");
    }
    if (j.contains("mask_options")) {
        if (c.preset.rfind("mask", 0) != 0) throw ConfigError("config: mask_options apply to mask presets only");
        const auto& o = j.at("mask_options");
        detail::allow_keys(o, {"bilayers", "tabn_thickness"}, "mask_options");
        if (o.contains("bilayers")) c.bilayers = detail::get_as<int>(o.at("bilayers"), "mask_options.bilayers");
        if (o.contains("tabn_thickness")) c.tabn_thickness = detail::get_as<double>(o.at("tabn_thickness"), "mask_options.tabn_thickness");
    }
    detail::read_opt(j, "materials", c.materials, "config");
    if (!c.materials.empty() && !std::filesystem::exists(c.materials))
        throw ConfigError("config: materials file '" + c.materials + "' does not exist");
    if (j.contains("source")) c.source = j.at("source");
    if (j.contains("Nx")) c.Nx = detail::get_as<int>(j.at("Nx"), "config.Nx");
    if (j.contains("Ny")) c.Ny = detail::get_as<int>(j.at("Ny"), "config.Ny");
    if ((c.Nx && *c.Nx < 0) || (c.Ny && *c.Ny < 0)) throw ConfigError("config: Nx, Ny must be >= 0");
    if (j.contains("grid")) {
        c.grid = j.at("grid");
        detail::allow_keys(c.grid, {"x", "y", "z"}, "grid");
    }
    detail::read_opt(j, "snap_incidence", c.snap_incidence, "config");
    if (j.contains("seeds")) c.seeds = detail::parse_seeds(j.at("seeds"), "config.seeds");
    detail::read_opt(j, "output", c.output, "config");
    detail::read_opt(j, "checkpoint", c.checkpoint, "config");
    if (j.contains("wgno")) detail::parse_wgno(j.at("wgno"), c.wgno, c.family);
    if (j.contains("pinn")) detail::parse_pinn(j.at("pinn"), c.pinn);
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file '" + path.string() + "' does not exist");
    try {
        return parse_run_config(json::parse(read_file(path)));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

inline MaterialTable materials_for(const RunConfig& c) {
    return MaterialTable::load(c.materials.empty() ? default_material_path() : c.materials);
}

/// Stack, source, truncation and sampling window after every override.
inline Preset resolve_preset(const RunConfig& c) {
    Preset p;
    if (!c.preset.empty()) {
        const bool mask = c.preset.rfind("mask", 0) == 0;
        const MaterialTable mats = mask ? materials_for(c) : MaterialTable{};
        p = make_preset(c.preset, mats);
        if (mask && (c.bilayers || c.tabn_thickness)) {
            MaskOptions o;
            o.wavelength = p.source.wavelength;
            o.three_d = p.stack.three_d();
            o.Nx = p.Nx;
            o.Ny = p.Ny;
            o.bilayers = c.bilayers.value_or(o.three_d ? 5 : 31);
            o.tabn_thickness = c.tabn_thickness.value_or(o.tabn_thickness);
            p = mask_preset(o, mats);
        }
        if (!c.source.is_null()) {
            if (c.source.contains("wavelength") && mask) throw ConfigError("config: mask presets fix the wavelength; use the other preset");
            detail::apply_source(c.source, p.source, "source");
        }
    } else {
        detail::apply_source(c.source, p.source, "source");
        const MaterialTable mats = materials_for(c);
        p.name = "inline";
        p.stack = detail::parse_inline_mask(c.inline_mask, mats, p.source.wavelength);
        if (p.stack.three_d()) p.source.polarization = Polarization::Vector;
        const double top = 0.25 * p.stack.Lx, bottom = -p.stack.total_thickness() - 0.25 * p.stack.Lx;
        p.window = {{-p.stack.Lx / 2, p.stack.Lx / 2, 101}, {0.0, 0.0, 1}, {bottom, top, 101}};
        p.Nx = 10;
        p.Ny = p.stack.three_d() ? 3 : 0;
    }
    if (c.Nx) p.Nx = *c.Nx;
    if (c.Ny) p.Ny = *c.Ny;
    if (!p.stack.three_d()) p.Ny = 0;
    if (c.snap_incidence) {
        p.source = snap_incidence(p.source, p.stack);
        p.snap = true;
    }
    if (!c.grid.is_null()) {
        if (c.grid.contains("x")) detail::apply_axis(c.grid.at("x"), p.window.x, "grid.x");
        if (c.grid.contains("y")) detail::apply_axis(c.grid.at("y"), p.window.y, "grid.y");
        if (c.grid.contains("z")) detail::apply_axis(c.grid.at("z"), p.window.z, "grid.z");
    }
    if (!p.stack.three_d() && p.window.y.count != 1) throw ConfigError("grid.y: 2D stacks take a single y sample");
    return p;
}

}  // namespace euvwg
