#pragma once

// Acceptance gates. Each gate runs its own experiment and returns PASS/FAIL with
// the measured numbers; `euvwg validate` and the acceptance test binary share them.

#include "euvwg/runner.hpp"

#include <functional>

namespace euvwg {

struct GateResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    json metrics;
};

namespace gates {

inline std::string sci(double v) {
    std::ostringstream os;
    os << std::scientific << std::setprecision(2) << v;
    return os.str();
}

inline FieldGrid oracle_reference(const Preset& p) { return pinn_reference(p); }

// 1. waveguide solve against the analytic test-problem solutions
inline GateResult wg_oracles() {
    GateResult g{1, "wg-vs-analytic", true, "", json::object()};
    for (int k = 1; k <= 3; ++k) {
        const Preset p = test_problem(k);
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = run_wg(p);
        const FieldGrid f = wg_field(r, p.window);
        const double secs = seconds_since(t0);
        const double e = relative_l2(f, oracle_reference(p));
        const bool ok = e <= 1e-10 && secs <= 1.0;
        g.pass = g.pass && ok;
        g.metrics[p.name] = {{"rel_l2", e}, {"seconds", secs}};
        g.detail += p.name + " relL2=" + sci(e) + " t=" + sci(secs) + "s; ";
    }
    return g;
}

// 2. relative residual of the direct solve on every preset
inline GateResult wg_residuals() {
    GateResult g{2, "wg-residual", true, "", json::object()};
    for (const auto& name : preset_names()) {
        const auto r = run_wg(make_preset(name));
        const double res = r.a.relative_residual;
        g.pass = g.pass && res <= 1e-12;
        g.metrics[name] = {{"relative_residual", res}, {"size", r.sys.layout.size()}};
        g.detail += name + "=" + sci(res) + " ";
    }
    return g;
}

/// 2D mask stack with the absorber left unpatterned (absorber material everywhere).
inline Preset unpatterned_mask(double wavelength) {
    MaskOptions o;
    o.wavelength = wavelength;
    Preset p = mask_preset(o, MaterialTable::load(default_material_path()));
    for (auto& l : p.stack.layers)
        if (const auto* h = std::get_if<HoleInX>(&l.pattern)) l.pattern = Uniform{h->eps_background};
    return p;
}

inline std::vector<oracle::UniformLayer> uniform_layers(const MaskStack& s) {
    std::vector<oracle::UniformLayer> out;
    for (const auto& l : s.layers) out.push_back({std::get<Uniform>(l.pattern).eps, l.thickness});
    return out;
}

// 3. WG vs transfer matrix on the 65-film mirror; transfer matrix vs finite differences
inline GateResult tmm_crosscheck() {
    GateResult g{3, "oracle-crosscheck", true, "", json::object()};
    for (double wl : {13.5, 11.2}) {
        const Preset p = unpatterned_mask(wl);
        const auto r = run_wg(p, true);
        const auto sol = oracle::tmm_multilayer(uniform_layers(p.stack), 1.0, p.stack.substrate_eps, p.source.k0(), p.source.kx(),
                                                Polarization::TE);
        const cplx r_wg = r.a.reflected()(r.sys.grid.incident_index());
        const double e = std::abs(r_wg - sol.r) / std::abs(sol.r);
        g.pass = g.pass && e <= 1e-8;
        const std::string key = "wg_vs_tmm_" + sci(wl);
        g.metrics[key] = {{"films", p.stack.layers.size()}, {"rel_error", e}};
        g.detail += "WG/TMM@" + std::to_string(wl).substr(0, 4) + "=" + sci(e) + " ";
    }
    // finite differences on the 13.5 nm mirror; every interface sits on a grid node (h = 0.01 nm)
    const Preset p = unpatterned_mask(13.5);
    const auto layers = uniform_layers(p.stack);
    const double depth = p.stack.total_thickness();
    const double z_max = 20.0, z_min = -depth - 20.0;
    const int points = int(std::lround((z_max - z_min) / 0.01)) + 1;
    const auto sol = oracle::tmm_multilayer(layers, 1.0, p.stack.substrate_eps, p.source.k0(), p.source.kx(), Polarization::TE);
    const auto fd = oracle::fd_helmholtz(layers, 1.0, p.stack.substrate_eps, p.source.k0(), p.source.kx(), z_min, z_max, points);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < points; ++i) {
        const cplx ref = sol.profile(z_min + (z_max - z_min) * i / (points - 1));
        num += std::norm(fd[std::size_t(i)] - ref);
        den += std::norm(ref);
    }
    const double e = std::sqrt(num / den);
    g.pass = g.pass && e <= 1e-4;
    g.metrics["tmm_vs_fd"] = {{"rel_l2", e}, {"points", points}};
    g.detail += "TMM/FD=" + sci(e);
    return g;
}

/// Random lossless TE grating: up to 4 hole layers, real eps in [1, 9], 1 <= Nx <= 5.
inline Preset random_lossless_grating(std::mt19937_64& rng) {
    auto u = [&](double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng); };
    Preset p;
    p.name = "random";
    p.source.wavelength = 1.0;
    p.source.polarization = Polarization::TE;
    p.stack.Lx = u(0.6, 2.5);
    const int J = 1 + int(rng() % 4);
    for (int j = 0; j < J; ++j) {
        HoleInX h{cplx{u(1.0, 9.0), 0.0}, cplx{u(1.0, 9.0), 0.0}, u(0.1, 0.9) * p.stack.Lx, u(-0.5, 0.5) * p.stack.Lx};
        p.stack.layers.push_back({u(0.05, 0.6), h, "L" + std::to_string(j)});
    }
    p.stack.substrate_eps = u(1.0, 9.0);
    // incidence on a propagating order m of the grating: sin(theta) = m lambda / Lx <= sin 50 deg
    const int m_max = int(std::floor(std::sin(50.0 * kPi / 180.0) * p.stack.Lx / p.source.wavelength));
    const int m = int(rng() % std::uint64_t(m_max + 1));
    p.source.theta = std::asin(m * p.source.wavelength / p.stack.Lx);
    p.source = snap_incidence(p.source, p.stack);
    p.Nx = 1 + int(rng() % 5);
    return p;
}

// 4. energy balance on randomized lossless gratings
inline GateResult energy_balance(int count = 25, std::uint64_t seed = 2024) {
    GateResult g{4, "energy-conservation", true, "", json::object()};
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    std::vector<double> defects;
    for (int i = 0; i < count; ++i) {
        const Preset p = random_lossless_grating(rng);
        const auto r = run_wg(p);
        const auto t = diffraction_efficiencies(r.a, r.sys);
        const double d = std::abs(t.total_R + t.total_T - 1.0);
        defects.push_back(d);
        worst = std::max(worst, d);
    }
    g.pass = worst <= 1e-10;
    g.metrics = {{"gratings", count}, {"max_defect", worst}, {"defects", defects}};
    g.detail = std::to_string(count) + " gratings, max |R+T-1| = " + sci(worst);
    return g;
}

struct WgnoScore {
    double rel_l2 = 0.0;
    double residual = 0.0;
    double train_seconds = 0.0;
    double infer_seconds = 0.0;
    double direct_seconds = 0.0;  // assemble + solve
};

inline WgnoScore score_wgno(const Preset& p, const WgnoConfig& cfg, std::uint64_t seed, const WgRun& r, const FieldGrid& ref) {
    const auto tr = train_wgno(r.sys, r.pb.coeffs, cfg, seed);
    const auto inf = infer_wgno(tr.model, r.sys, r.pb.coeffs);
    const FieldGrid f = reconstruct_field(inf.amplitudes, r.sys, p.window);
    return {relative_l2(f, ref), inf.amplitudes.relative_residual, tr.report.seconds, inf.seconds, r.seconds_assemble + r.seconds_solve};
}

// 5. WGNO on the test problems, 7 seeds each; the gate is on the seed mean
inline GateResult wgno_tests(const std::function<void(const std::string&)>& log = {}) {
    GateResult g{5, "wgno-test-problems", true, "", json::object()};
    const WgnoConfig cfg;
    for (int k = 1; k <= 3; ++k) {
        const Preset p = test_problem(k);
        const auto r = run_wg(p);
        const FieldGrid ref = wg_field(r, p.window);
        std::vector<double> rel, secs;
        for (auto seed : cfg.seeds) {
            const auto s = score_wgno(p, cfg, seed, r, ref);
            rel.push_back(s.rel_l2);
            secs.push_back(s.train_seconds);
            if (log) log(p.name + " seed " + std::to_string(seed) + " relL2=" + sci(s.rel_l2) + " train=" + sci(s.train_seconds) + "s");
        }
        const auto st = seed_stats(rel);
        const double tol = k == 3 ? 1e-3 : 1e-4;
        const double tmax = *std::max_element(secs.begin(), secs.end());
        const bool ok = st["mean"].get<double>() <= tol && tmax <= 120.0;
        g.pass = g.pass && ok;
        g.metrics[p.name] = {{"rel_l2", st}, {"train_seconds", seed_stats(secs)}, {"tolerance", tol}};
        g.detail += p.name + " " + sci(st["mean"].get<double>()) + "+-" + sci(st["std"].get<double>()) + " (max train " + sci(tmax) + "s); ";
    }
    return g;
}

// 6. WGNO on the 2D mask at both wavelengths
inline GateResult wgno_mask2d(const std::function<void(const std::string&)>& log = {}) {
    GateResult g{6, "wgno-mask2d", true, "", json::object()};
    const WgnoConfig cfg;
    for (const char* name : {"mask2d_13.5", "mask2d_11.2"}) {
        const Preset p = make_preset(name);
        const auto r = run_wg(p);
        const auto s = score_wgno(p, cfg, 0, r, wg_field(r, p.window));
        const bool ok = s.rel_l2 <= 1e-4 && s.infer_seconds <= 10e-3;
        g.pass = g.pass && ok;
        g.metrics[name] = {{"rel_l2", s.rel_l2},
                           {"relative_residual", s.residual},
                           {"train_seconds", s.train_seconds},
                           {"infer_seconds", s.infer_seconds},
                           {"size", r.sys.layout.size()}};
        g.detail += std::string(name) + " relL2=" + sci(s.rel_l2) + " infer=" + sci(s.infer_seconds) + "s; ";
        if (log) log(g.detail);
    }
    return g;
}

// 7. WGNO on the reduced 3D mask: accuracy and speed-up over assemble + solve
inline GateResult wgno_mask3d(const std::function<void(const std::string&)>& log = {}) {
    GateResult g{7, "wgno-mask3d", true, "", json::object()};
    const WgnoConfig cfg;
    for (const char* name : {"mask3d_13.5", "mask3d_11.2"}) {
        const Preset p = make_preset(name);
        const auto r = run_wg(p);
        const auto s = score_wgno(p, cfg, 0, r, wg_field(r, p.window));
        const double speedup = s.direct_seconds / s.infer_seconds;
        const bool ok = s.rel_l2 <= 1e-3 && speedup >= 10.0;
        g.pass = g.pass && ok;
        g.metrics[name] = {{"rel_l2", s.rel_l2},
                           {"relative_residual", s.residual},
                           {"train_seconds", s.train_seconds},
                           {"infer_seconds", s.infer_seconds},
                           {"direct_seconds", s.direct_seconds},
                           {"speedup", speedup},
                           {"size", r.sys.layout.size()}};
        g.detail += std::string(name) + " relL2=" + sci(s.rel_l2) + " speedup=" + sci(speedup) + "x; ";
        if (log) log(g.detail);
    }
    return g;
}

// 8. PINN on the test problems, 7 seeds each; the gate is on the seed mean
/// A run that hits the 30 min budget already fails the criterion, so the
/// remaining seeds of that problem are skipped (the report says so).
inline GateResult pinn_tests(const std::function<void(const std::string&)>& log = {}, std::vector<int> problems = {1, 2, 3}) {
    GateResult g{8, "pinn-test-problems", true, "", json::object()};
    constexpr double budget = 1800.0;
    PinnConfig cfg;
    cfg.max_seconds = budget;
    for (int k : problems) {
        const Preset p = test_problem(k);
        const auto prob = make_pinn_problem(p);
        const FieldGrid ref = oracle_reference(p);
        std::vector<double> rel, secs;
        bool over = false;
        for (auto seed : cfg.seeds) {
            const auto tr = train_pinn(prob, cfg, seed, &ref, &p.window);
            rel.push_back(tr.report.rel_l2);
            secs.push_back(tr.report.seconds);
            const auto iters = tr.report.loss.size() - std::size_t(std::min<int>(tr.report.adam_epochs, int(tr.report.loss.size())));
            if (log)
                log(p.name + " seed " + std::to_string(seed) + " relL2=" + sci(tr.report.rel_l2) + " t=" + sci(tr.report.seconds) +
                    "s lbfgs_iterations=" + std::to_string(iters) + (tr.report.time_limited ? " (stopped at the time budget)" : ""));
            if (tr.report.time_limited) {
                over = true;
                break;
            }
        }
        const auto st = seed_stats(rel);
        const double tol = k == 1 ? 1e-3 : (k == 2 ? 5e-3 : 1e-1);
        const double tmax = *std::max_element(secs.begin(), secs.end());
        g.pass = g.pass && !over && st["mean"].get<double>() <= tol && tmax <= budget;
        g.metrics[p.name] = {{"rel_l2", st}, {"train_seconds", seed_stats(secs)}, {"tolerance", tol}, {"over_budget", over}};
        g.detail += p.name + " " + sci(st["mean"].get<double>()) + "+-" + sci(st["std"].get<double>()) + " (max " + sci(tmax) + "s";
        if (over) g.detail += ", over the 1800 s budget after " + std::to_string(rel.size()) + " seed(s), rest skipped";
        g.detail += "); ";
    }
    return g;
}

inline double rel_err(const RVector& a, const RVector& b) {
    const double d = b.norm();
    return (a - b).norm() / (d > 0.0 ? d : 1.0);
}

/// Central differences of f over a parameter subset (every `stride`-th entry).
inline double fd_gradient_error(const MlpParams& p, const std::function<double(const MlpParams&)>& f, const RVector& grad, int stride,
                                double h = 1e-6) {
    const RVector th = p.flatten();
    std::vector<Eigen::Index> idx;
    for (Eigen::Index k = 0; k < th.size(); k += stride) idx.push_back(k);
    RVector fd(Eigen::Index(idx.size())), an(Eigen::Index(idx.size()));
    MlpParams q = p;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        RVector t = th;
        t(idx[i]) += h;
        q.unflatten(t);
        const double fp = f(q);
        t(idx[i]) -= 2.0 * h;
        q.unflatten(t);
        fd(Eigen::Index(i)) = (fp - f(q)) / (2.0 * h);
        an(Eigen::Index(i)) = grad(idx[i]);
    }
    return rel_err(an, fd);
}

inline double wgno_gradient_error(const MlpParams& p, const ResidualLoss& loss, const RVector& x) {
    const auto value = [&](const MlpParams& q) { return loss.value(decode_output(mlp_forward(q, x))); };
    const MlpCache c = mlp_forward_cached(p, RMatrix(x));
    RVector dy;
    loss.value_and_grad(c.acts.back().col(0), dy);
    const MlpParams g = mlp_backward(p, c, RMatrix(dy));
    const int stride = std::max<int>(1, int(p.parameter_count() / 300));
    return fd_gradient_error(p, value, g.flatten(), stride);
}

// 9. analytic gradients and PINN spatial derivatives against central differences
inline GateResult gradients(std::uint64_t seed = 7) {
    GateResult g{9, "gradient-checks", true, "", json::object()};
    std::mt19937_64 rng(seed);
    auto rnd = [&] { return 2.0 * unit_uniform(rng) - 1.0; };
    auto crand = [&](Eigen::Index r, Eigen::Index c) {
        CMatrix m(r, c);
        for (Eigen::Index j = 0; j < c; ++j)
            for (Eigen::Index i = 0; i < r; ++i) m(i, j) = {rnd(), rnd()};
        return m;
    };
    // WGNO: 1-2-2 network on a 1x1 complex system
    {
        const MlpParams p = glorot_init({1, 2, 2}, seed);
        const ResidualLoss loss(crand(1, 1), crand(1, 1).col(0));
        RVector x(1);
        x << 0.7;
        g.metrics["wgno_122"] = wgno_gradient_error(p, loss, x);
    }
    // WGNO: full encoder input of test problem 3, random system of the same size
    {
        const Preset pr = test_problem(3);
        const auto r = run_wg(pr);
        const auto enc = InputEncoder::bind(r.sys, r.pb.coeffs);
        const Eigen::Index n = r.sys.layout.size();
        WgnoConfig cfg;
        cfg.hidden_width = 16;
        const MlpParams p = glorot_init(wgno_sizes(enc.size(), int(2 * n), cfg), seed + 1);
        const ResidualLoss loss(crand(n, n), crand(n, 1).col(0));
        g.metrics["wgno_full_input"] = wgno_gradient_error(p, loss, enc.encode(r.sys.R, r.pb.coeffs));
    }
    // PINN: loss gradient on a coarse collocation set, every test problem
    for (int k = 1; k <= 3; ++k) {
        const Preset pr = test_problem(k);
        const auto q = make_pinn_problem(pr);
        PinnConfig cfg;
        cfg.hidden_width = 12;
        cfg.intervals_x = cfg.intervals_z = 8;
        cfg.boundary_points = 24;
        cfg.boundary_harmonics = 3;
        cfg.threads = 1;
        const PinnObjective obj(q, cfg);
        const MlpParams p = glorot_init(pinn_sizes(cfg), seed + 10 + std::uint64_t(k));
        MlpParams gr;
        obj.evaluate(p, &gr);
        g.metrics["pinn_loss_" + pr.name] =
            fd_gradient_error(p, [&](const MlpParams& t) { return obj.evaluate(t, nullptr).total; }, gr.flatten(), 3);
    }
    // PINN: first and second spatial derivatives at 100 random points; steps of 1e-4 in
    // the network's scaled coordinates
    {
        const Preset pr = test_problem(3);
        const auto q = make_pinn_problem(pr);
        const MlpParams p = glorot_init(pinn_sizes(PinnConfig{}), seed + 20);
        RMatrix xz(2, 100);
        for (int i = 0; i < 100; ++i) {
            xz(0, i) = q.x_lo + (q.x_hi - q.x_lo) * unit_uniform(rng);
            xz(1, i) = q.z_lo + (q.z_hi - q.z_lo) * unit_uniform(rng);
        }
        const auto d = forward_with_derivs(p, q, xz);
        const double hx = 1e-4 / q.sx(), hz = 1e-4 / q.sz();
        auto shifted = [&](double dx, double dz) {
            RMatrix s = xz;
            s.row(0).array() += dx;
            s.row(1).array() += dz;
            return forward_with_derivs(p, q, s);
        };
        const auto xp = shifted(hx, 0), xm = shifted(-hx, 0), zp = shifted(0, hz), zm = shifted(0, -hz);
        auto flat = [](const RMatrix& m) { return RVector(Eigen::Map<const RVector>(m.data(), m.size())); };
        g.metrics["pinn_dx"] = rel_err(flat(d.dx), flat((xp.v - xm.v) / (2 * hx)));
        g.metrics["pinn_dz"] = rel_err(flat(d.dz), flat((zp.v - zm.v) / (2 * hz)));
        // second derivatives: central differences of the first-derivative streams
        // (second differences of values lose ~eps/h^2 to cancellation)
        g.metrics["pinn_dxx"] = rel_err(flat(d.dxx), flat((xp.dx - xm.dx) / (2 * hx)));
        g.metrics["pinn_dzz"] = rel_err(flat(d.dzz), flat((zp.dz - zm.dz) / (2 * hz)));
    }
    double worst = 0.0;
    for (const auto& [k, v] : g.metrics.items()) {
        worst = std::max(worst, v.get<double>());
        g.detail += k + "=" + sci(v.get<double>()) + " ";
    }
    g.pass = worst <= 1e-6;
    return g;
}

// 10. bitwise reproducibility of repeated runs (timings excluded)
inline GateResult determinism() {
    GateResult g{10, "determinism", true, "", json::object()};
    auto same = [](const std::vector<double>& a, const std::vector<double>& b) {
        return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
    };
    // direct solves
    {
        const Preset p = make_preset("mask2d_13.5");
        const auto a = run_wg(p).a.values, b = run_wg(p).a.values;
        const bool ok = a.size() == b.size() && std::memcmp(a.data(), b.data(), std::size_t(a.size()) * sizeof(cplx)) == 0;
        g.metrics["wg_mask2d"] = ok;
    }
    // WGNO: full schedule on test problem 2, same seed twice
    {
        const Preset p = test_problem(2);
        const auto r = run_wg(p);
        const WgnoConfig cfg;
        const auto a = train_wgno(r.sys, r.pb.coeffs, cfg, 3), b = train_wgno(r.sys, r.pb.coeffs, cfg, 3);
        const RVector pa = a.model.params.flatten(), pb = b.model.params.flatten();
        g.metrics["wgno_test2"] = same(a.report.loss, b.report.loss) &&
                                  std::memcmp(pa.data(), pb.data(), std::size_t(pa.size()) * sizeof(double)) == 0;
    }
    // PINN: shortened schedule, one and two worker threads
    {
        const Preset p = test_problem(1);
        const auto q = make_pinn_problem(p);
        PinnConfig cfg;
        cfg.intervals_x = cfg.intervals_z = 40;
        cfg.adam_epochs = 30;
        cfg.lbfgs_epochs = 1;
        cfg.lbfgs_iterations_per_epoch = 5;
        cfg.threads = 1;
        const auto a = train_pinn(q, cfg, 5);
        cfg.threads = 2;
        const auto b = train_pinn(q, cfg, 5);
        g.metrics["pinn_test1_threads"] = same(a.report.loss, b.report.loss);
    }
    // whole reports from the runner
    {
        RunConfig c;
        c.preset = "test3";
        c.output = (std::filesystem::temp_directory_path() / "euvwg_determinism").string();
        c.seeds = {0};
        const json a = without_timings(run("solve", c)), b = without_timings(run("solve", c));
        const json wa = without_timings(run("train-wgno", c)), wb = without_timings(run("train-wgno", c));
        g.metrics["reports"] = a == b && wa == wb;
        std::filesystem::remove_all(c.output);
    }
    for (const auto& [k, v] : g.metrics.items()) {
        g.pass = g.pass && v.get<bool>();
        g.detail += k + (v.get<bool>() ? "=identical " : "=DIFFERS ");
    }
    return g;
}

}  // namespace gates

inline std::vector<int> fast_gate_ids() { return {1, 2, 3, 4, 9, 10}; }

inline GateResult run_gate(int id, const std::function<void(const std::string&)>& log = {}) {
    switch (id) {
        case 1: return gates::wg_oracles();
        case 2: return gates::wg_residuals();
        case 3: return gates::tmm_crosscheck();
        case 4: return gates::energy_balance();
        case 5: return gates::wgno_tests(log);
        case 6: return gates::wgno_mask2d(log);
        case 7: return gates::wgno_mask3d(log);
        case 8: return gates::pinn_tests(log);
        case 9: return gates::gradients();
        case 10: return gates::determinism();
        default: throw ConfigError("no acceptance gate " + std::to_string(id));
    }
}

inline std::string gate_line(const GateResult& g) {
    return std::string(g.pass ? "PASS" : "FAIL") + " [" + std::to_string(g.id) + "] " + g.name + ": " + g.detail;
}

inline bool layer_is_lossless(const LayerSpec& l) {
    return std::visit(
        [](const auto& pt) {
            using T = std::decay_t<decltype(pt)>;
            if constexpr (std::is_same_v<T, HoleInX>)
                return pt.eps_background.imag() == 0.0 && pt.eps_hole.imag() == 0.0;
            else
                return pt.eps.imag() == 0.0;
        },
        l.pattern);
}

struct ValidateOutcome {
    bool pass = true;
    json report;
};

/// Gates 1-4, 9, 10 (or all ten with `full`), plus a direct-solve sanity check of
/// the configured problem when there is one. Lines go to `out` as each gate ends.
inline ValidateOutcome run_validate(const RunConfig* c, bool full, std::ostream& out) {
    ValidateOutcome v;
    v.report["gates"] = json::array();
    std::vector<int> ids = fast_gate_ids();
    if (full) ids = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const auto log = [&](const std::string& s) { out << "  " << s << std::endl; };
    for (int id : ids) {
        const GateResult g = run_gate(id, log);
        out << gate_line(g) << std::endl;
        v.pass = v.pass && g.pass;
        v.report["gates"].push_back({{"id", g.id}, {"name", g.name}, {"pass", g.pass}, {"detail", g.detail}, {"metrics", g.metrics}});
    }
    if (c && (!c->preset.empty() || !c->inline_mask.is_null())) {
        const Preset p = resolve_preset(*c);
        const auto r = run_wg(p);
        const double res = r.a.relative_residual;
        json chk{{"preset", p.name}, {"relative_residual", res}};
        bool ok = res <= 1e-10;
        std::string detail = p.name + " residual=" + gates::sci(res);
        bool lossless = p.stack.substrate_eps.imag() == 0.0;
        for (const auto& l : p.stack.layers) lossless = lossless && layer_is_lossless(l);
        if (lossless) {
            const auto t = diffraction_efficiencies(r.a, r.sys);
            const double d = std::abs(t.total_R + t.total_T - 1.0);
            chk["energy_defect"] = d;
            ok = ok && d <= 1e-8;
            detail += " |R+T-1|=" + gates::sci(d);
        }
        chk["pass"] = ok;
        out << (ok ? "PASS" : "FAIL") << " [config] " << detail << std::endl;
        v.pass = v.pass && ok;
        v.report["config_problem"] = chk;
    }
    v.report["pass"] = v.pass;
    if (c) save_json(v.report, std::filesystem::path(c->output) / "validate.json");
    return v;
}

}  // namespace euvwg
