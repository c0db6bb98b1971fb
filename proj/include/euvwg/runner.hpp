#pragma once

// Pipelines behind the command line: solve, train-wgno, infer-wgno, train-pinn, eval.
// Each writes its artifacts under the output directory and returns a metrics
// report (also written as metrics.json). Keys ending in "seconds" are wall-clock
// and the only entries allowed to differ between repeated runs.

#include "euvwg/config.hpp"

#include <iostream>

namespace euvwg {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct WgRun {
    Problem pb;
    GlobalSystem sys;
    AmplitudeVector a;
    double seconds_prepare = 0.0;
    double seconds_assemble = 0.0;
    double seconds_solve = 0.0;
};

inline WgRun run_wg(const Preset& p, bool numeric_uniform = false) {
    WgRun r;
    auto t = std::chrono::steady_clock::now();
    r.pb = prepare_problem(p.stack, p.source, p.Nx, p.Ny, numeric_uniform);
    r.seconds_prepare = seconds_since(t);
    t = std::chrono::steady_clock::now();
    r.sys = assemble_global(r.pb);
    r.seconds_assemble = seconds_since(t);
    t = std::chrono::steady_clock::now();
    r.a = solve_direct(r.sys);
    r.seconds_solve = seconds_since(t);
    return r;
}

/// mean, sample std, min, max and the values themselves.
inline json seed_stats(const std::vector<double>& v) {
    if (v.empty()) return json::object();
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= double(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(var / double(v.size() - 1)) : 0.0;
    return {{"mean", mean},
            {"std", sd},
            {"min", *std::min_element(v.begin(), v.end())},
            {"max", *std::max_element(v.begin(), v.end())},
            {"values", v}};
}

inline json preset_json(const Preset& p) {
    json layers = json::array();
    for (const auto& l : p.stack.layers) {
        json lj = {{"label", l.label}, {"thickness", l.thickness}};
        std::visit(
            [&](const auto& pat) {
                using T = std::decay_t<decltype(pat)>;
                if constexpr (std::is_same_v<T, Uniform>)
                    lj["pattern"] = {{"type", "uniform"}, {"eps", {pat.eps.real(), pat.eps.imag()}}};
                else if constexpr (std::is_same_v<T, HoleInX>)
                    lj["pattern"] = {{"type", "hole"},
                                     {"background", {pat.eps_background.real(), pat.eps_background.imag()}},
                                     {"hole", {pat.eps_hole.real(), pat.eps_hole.imag()}},
                                     {"width", pat.width},
                                     {"center", pat.center}};
                else
                    lj["pattern"] = {{"type", "tanh_pad"}, {"eps", {pat.eps.real(), pat.eps.imag()}}, {"a", pat.a}, {"b", pat.b}, {"d", pat.d}};
            },
            l.pattern);
        layers.push_back(lj);
    }
    const auto [m0, n0] = nearest_orders(p.source, p.stack);
    return {{"name", p.name},
            {"Lx", p.stack.Lx},
            {"Ly", p.stack.Ly},
            {"dim", p.stack.three_d() ? 3 : 2},
            {"substrate_eps", {p.stack.substrate_eps.real(), p.stack.substrate_eps.imag()}},
            {"layers", layers},
            {"wavelength", p.source.wavelength},
            {"theta_deg", p.source.theta * 180.0 / kPi},
            {"phi_deg", p.source.phi * 180.0 / kPi},
            {"polarization", to_string(p.source.polarization)},
            {"snapped", p.snap},
            {"incident_order", {m0, n0}},
            {"Nx", p.Nx},
            {"Ny", p.Ny}};
}

/// Field sampled on the preset window; 3D runs give the y = 0 plane.
inline FieldGrid wg_field(const WgRun& r, const SampleSpec& s) { return reconstruct_field(r.a, r.sys, s); }

/// x = 0 cross-section for 3D stacks, over one period in y.
inline SampleSpec x0_section(const Preset& p) {
    return {{0.0, 0.0, 1}, {-p.stack.Ly / 2, p.stack.Ly / 2, p.window.x.count}, p.window.z};
}

namespace detail {

inline void export_both(const FieldGrid& f, const std::filesystem::path& dir, const std::string& stem, json& artifacts) {
    export_field(f, dir / (stem + ".csv"));
    export_field(f, dir / (stem + ".bin"));
    artifacts.push_back(stem + ".csv");
    artifacts.push_back(stem + ".bin");
}

inline std::string curve_csv(const std::vector<double>& loss) {
    std::string s = "epoch,loss\n";
    for (std::size_t i = 0; i < loss.size(); ++i) s += std::to_string(i) + ',' + fmt_double(loss[i]) + '\n';
    return s;
}

inline std::vector<std::uint64_t> seeds_or(const RunConfig& c, const std::vector<std::uint64_t>& fallback) {
    return c.seeds.empty() ? fallback : c.seeds;
}

}  // namespace detail

inline json run_solve(const RunConfig& c, const Preset& p) {
    const std::filesystem::path dir = c.output;
    const auto r = run_wg(p);
    const auto orders = diffraction_efficiencies(r.a, r.sys);
    json art = json::array();
    write_atomic(dir / "orders.csv", orders_to_csv(orders));
    art.push_back("orders.csv");
    if (p.stack.three_d()) {
        detail::export_both(wg_field(r, p.window), dir, "field_y0", art);
        detail::export_both(wg_field(r, x0_section(p)), dir, "field_x0", art);
    } else {
        detail::export_both(wg_field(r, p.window), dir, "field", art);
    }
    const int inc = r.sys.grid.incident_index();
    return {{"relative_residual", r.a.relative_residual},
            {"system_size", r.sys.layout.size()},
            {"layout", r.sys.layout.describe()},
            {"total_R", orders.total_R},
            {"total_T", orders.total_T},
            {"energy_defect", orders.total_R + orders.total_T - 1.0},
            {"specular_r", {orders.rows[std::size_t(inc)].r[0].real(), orders.rows[std::size_t(inc)].r[0].imag()}},
            {"timings",
             {{"fourier_seconds", r.pb.seconds_fourier},
              {"eig_seconds", r.pb.seconds_modes},
              {"assemble_seconds", r.seconds_assemble},
              {"solve_seconds", r.seconds_solve}}},
            {"artifacts", art}};
}

/// Per-instance (or family) WGNO training over the configured seeds, each scored
/// against the direct solve.
inline json run_train_wgno(const RunConfig& c, const Preset& p) {
    const std::filesystem::path dir = c.output;
    const auto r = run_wg(p);
    const FieldGrid ref = wg_field(r, p.window);
    const auto seeds = detail::seeds_or(c, c.wgno.seeds);

    std::vector<GlobalSystem> pool;
    std::vector<std::vector<PermittivityFourier>> pool_coeffs;
    if (c.family) {
        for (double w : c.family->hole_widths) {
            Preset q = p;
            bool any = false;
            for (auto& l : q.stack.layers)
                if (auto* h = std::get_if<HoleInX>(&l.pattern)) {
                    h->width = w;
                    any = true;
                }
            if (!any) throw ConfigError("wgno.family: the stack has no hole layers to vary");
            auto pb = prepare_problem(q.stack, q.source, q.Nx, q.Ny);
            pool.push_back(assemble_global(pb));
            pool_coeffs.push_back(std::move(pb.coeffs));
        }
    }

    json runs = json::array(), art = json::array();
    std::vector<double> rel, res, secs;
    for (auto seed : seeds) {
        auto tr = c.family ? train_wgno_family(pool, pool_coeffs, c.wgno, seed, c.family->batch) : train_wgno(r.sys, r.pb.coeffs, c.wgno, seed);
        const auto inf = infer_wgno(tr.model, r.sys, r.pb.coeffs);
        tr.report.rel_l2 = relative_l2(wg_field(WgRun{r.pb, r.sys, inf.amplitudes}, p.window), ref);
        const std::string stem = "wgno_seed" + std::to_string(seed);
        save_json(wgno_checkpoint(tr.model), dir / (stem + ".json"));
        write_atomic(dir / (stem + "_loss.csv"), detail::curve_csv(tr.report.loss));
        art.push_back(stem + ".json");
        art.push_back(stem + "_loss.csv");
        rel.push_back(tr.report.rel_l2);
        res.push_back(inf.amplitudes.relative_residual);
        secs.push_back(tr.report.seconds);
        runs.push_back({{"seed", seed},
                        {"rel_l2", tr.report.rel_l2},
                        {"relative_residual", inf.amplitudes.relative_residual},
                        {"best_loss", tr.report.best_loss},
                        {"final_loss", tr.report.final_loss},
                        {"epochs", tr.report.loss.size()},
                        {"train_seconds", tr.report.seconds},
                        {"infer_seconds", inf.seconds}});
    }
    return {{"mode_detail", c.family ? "family" : "instance"},
            {"direct_relative_residual", r.a.relative_residual},
            {"system_size", r.sys.layout.size()},
            {"runs", runs},
            {"rel_l2", seed_stats(rel)},
            {"relative_residual", seed_stats(res)},
            {"train_seconds", seed_stats(secs)},
            {"timings",
             {{"fourier_seconds", r.pb.seconds_fourier},
              {"eig_seconds", r.pb.seconds_modes},
              {"assemble_seconds", r.seconds_assemble},
              {"solve_seconds", r.seconds_solve}}},
            {"artifacts", art}};
}

inline json wgno_eval(const RunConfig& c, const Preset& p, const WgnoModel& model) {
    const std::filesystem::path dir = c.output;
    const auto r = run_wg(p);
    const auto inf = infer_wgno(model, r.sys, r.pb.coeffs);
    const WgRun nn{r.pb, r.sys, inf.amplitudes};
    json art = json::array();
    const FieldGrid f = wg_field(nn, p.window);
    detail::export_both(f, dir, "wgno_field", art);
    return {{"rel_l2", relative_l2(f, wg_field(r, p.window))},
            {"relative_residual", inf.amplitudes.relative_residual},
            {"timings",
             {{"infer_seconds", inf.seconds},
              {"assemble_seconds", r.seconds_assemble},
              {"solve_seconds", r.seconds_solve},
              {"eig_seconds", r.pb.seconds_modes}}},
            {"artifacts", art}};
}

/// The problem the PINN sees: 2D mask presets are trimmed to one Mo/Si bilayer
/// (unless a bilayer count is configured) and windowed into the substrate.
inline Preset pinn_preset(const RunConfig& c, const Preset& p, PinnConfig& cfg, json& notes) {
    Preset q = p;
    if (c.preset.rfind("mask2d", 0) == 0) {
        if (!c.bilayers) {
            MaskOptions o;
            o.wavelength = p.source.wavelength;
            o.bilayers = 1;
            o.Nx = p.Nx;
            o.tabn_thickness = c.tabn_thickness.value_or(o.tabn_thickness);
            q = mask_preset(o, materials_for(c));
            notes.push_back("mask trimmed to one Mo/Si bilayer");
        }
        if (cfg.interface_band == 0) {
            cfg.interface_band = 1;
            notes.push_back("collocation rows next to interfaces excluded");
        }
    }
    const double deepest = -q.stack.total_thickness();
    if (!(q.window.z.lo < deepest)) {
        if (!c.grid.is_null() && c.grid.contains("z")) throw ConfigError("train-pinn: grid.z must reach into the substrate");
        q.window.z.lo = deepest - 0.1 * (q.window.z.hi - deepest);
        notes.push_back("window extended into the substrate");
    }
    return q;
}

inline json run_train_pinn(const RunConfig& c, const Preset& p) {
    const std::filesystem::path dir = c.output;
    PinnConfig cfg = c.pinn;
    json notes = json::array();
    const Preset q = pinn_preset(c, p, cfg, notes);
    const PinnProblem prob = make_pinn_problem(q);
    const FieldGrid ref = pinn_reference(q);
    const auto seeds = detail::seeds_or(c, cfg.seeds);
    json runs = json::array(), art = json::array();
    std::vector<double> rel, secs;
    for (auto seed : seeds) {
        const auto tr = train_pinn(prob, cfg, seed, &ref, &q.window);
        const std::string stem = "pinn_seed" + std::to_string(seed);
        save_json(pinn_checkpoint(tr.model), dir / (stem + ".json"));
        write_atomic(dir / (stem + "_loss.csv"), detail::curve_csv(tr.report.loss));
        export_field(pinn_field_grid(tr.model, q.window), dir / (stem + "_field.bin"));
        for (const auto* s : {".json", "_loss.csv", "_field.bin"}) art.push_back(stem + s);
        rel.push_back(tr.report.rel_l2);
        secs.push_back(tr.report.seconds);
        runs.push_back({{"seed", seed},
                        {"rel_l2", tr.report.rel_l2},
                        {"loss", tr.report.final_loss},
                        {"L_r", tr.report.final_residual},
                        {"L_bc", tr.report.final_boundary},
                        {"adam_epochs", tr.report.adam_epochs},
                        {"lbfgs_iterations", tr.report.loss.size() - std::size_t(tr.report.adam_epochs)},
                        {"lbfgs", tr.report.lbfgs_summary},
                        {"time_limited", tr.report.time_limited},
                        {"train_seconds", tr.report.seconds}});
    }
    return {{"problem", preset_json(q)},
            {"notes", notes},
            {"lambda_r", cfg.lambda_r},
            {"lambda_bc", cfg.lambda_bc},
            {"interior_points", PinnObjective(prob, cfg).collocation().interior.cols()},
            {"runs", runs},
            {"rel_l2", seed_stats(rel)},
            {"train_seconds", seed_stats(secs)},
            {"artifacts", art}};
}

inline json run_eval(const RunConfig& c, const Preset& p) {
    if (c.checkpoint.empty()) throw ConfigError("eval: 'checkpoint' is required");
    if (!std::filesystem::exists(c.checkpoint)) throw ConfigError("checkpoint '" + c.checkpoint + "' does not exist");
    const json ck = load_json(c.checkpoint);
    const auto kind = checkpoint_kind(ck);
    if (kind == "wgno") return wgno_eval(c, p, wgno_from_checkpoint(ck));
    if (kind != "pinn") throw ConfigError("eval: unknown checkpoint kind '" + kind + "'");
    PinnConfig cfg = c.pinn;
    json notes = json::array();
    const Preset q = pinn_preset(c, p, cfg, notes);
    PinnModel m = pinn_from_checkpoint(ck);
    const auto want = make_pinn_problem(q);
    if (std::abs(m.problem.k0 - want.k0) > 1e-12 * want.k0 || std::abs(m.problem.kx - want.kx) > 1e-12 * want.k0)
        throw ConfigError("eval: PINN checkpoint was trained for a different source");
    const FieldGrid f = pinn_field_grid(m, q.window);
    json art = json::array();
    detail::export_both(f, c.output, "pinn_field", art);
    return {{"rel_l2", relative_l2(f, pinn_reference(q))}, {"notes", notes}, {"artifacts", art}};
}

inline const std::vector<std::string>& run_modes() {
    static const std::vector<std::string> m{"solve", "train-wgno", "infer-wgno", "train-pinn", "eval", "validate"};
    return m;
}

/// Runs one non-validate mode and writes metrics.json with the config echo.
inline json run(const std::string& mode, const RunConfig& c) {
    const Preset p = resolve_preset(c);
    const auto t0 = std::chrono::steady_clock::now();
    json out;
    if (mode == "solve")
        out = run_solve(c, p);
    else if (mode == "train-wgno")
        out = run_train_wgno(c, p);
    else if (mode == "infer-wgno") {
        if (c.checkpoint.empty()) throw ConfigError("infer-wgno: 'checkpoint' is required");
        if (!std::filesystem::exists(c.checkpoint)) throw ConfigError("checkpoint '" + c.checkpoint + "' does not exist");
        out = wgno_eval(c, p, wgno_from_checkpoint(load_json(c.checkpoint)));
    } else if (mode == "train-pinn")
        out = run_train_pinn(c, p);
    else if (mode == "eval")
        out = run_eval(c, p);
    else
        throw ConfigError("unknown mode '" + mode + "'");
    out["mode"] = mode;
    out["preset"] = preset_json(p);
    json echo = c.document;
    echo["mode"] = mode;
    if (!c.seeds.empty()) echo["seeds"] = c.seeds;
    if (c.snap_incidence) echo["snap_incidence"] = true;
    echo["output"] = c.output;
    out["config"] = echo;
    out["total_seconds"] = seconds_since(t0);
    save_json(out, std::filesystem::path(c.output) / "metrics.json");
    return out;
}

/// Copy of a report with every wall-clock entry removed.
inline json without_timings(const json& j) {
    if (j.is_object()) {
        json o = json::object();
        for (const auto& [k, v] : j.items()) {
            if (k.size() >= 7 && k.compare(k.size() - 7, 7, "seconds") == 0) continue;
            o[k] = without_timings(v);
        }
        return o;
    }
    if (j.is_array()) {
        json a = json::array();
        for (const auto& v : j) a.push_back(without_timings(v));
        return a;
    }
    return j;
}

}  // namespace euvwg
