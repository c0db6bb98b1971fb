// euvwg command line: euvwg <mode> --config run.json [--seeds K] [--snap-incidence] [--out DIR] [--full]
//
// exit codes: 0 ok, 2 bad input (config, files, parse), 3 numerical failure,
// 4 validation gate failed, 1 anything else.

#include "euvwg/validation.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace euvwg;
    CLI::App app{"EUV mask scattering: waveguide solver, WGNO and PINN surrogates"};
    std::string mode, config;
    int seeds = 0;
    bool snap = false, full = false;
    std::string out;
    app.add_option("mode", mode, "solve | train-wgno | infer-wgno | train-pinn | eval | validate")
        ->required()
        ->check(CLI::IsMember(run_modes()));
    app.add_option("--config", config, "run configuration (JSON)");
    app.add_option("--seeds", seeds, "train with seeds 0..K-1")->check(CLI::PositiveNumber);
    app.add_flag("--snap-incidence", snap, "move the incidence angle onto the nearest diffraction order");
    app.add_option("--out", out, "output directory (overrides the config)");
    app.add_flag("--full", full, "validate: also run the training gates (hours)");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig c;
        const bool have_config = !config.empty();
        if (have_config)
            c = load_run_config(config);
        else if (mode != "validate")
            throw ConfigError("--config is required for mode " + mode);
        if (seeds > 0) {
            c.seeds.clear();
            for (int s = 0; s < seeds; ++s) c.seeds.push_back(std::uint64_t(s));
        }
        if (snap) c.snap_incidence = true;
        if (!out.empty()) c.output = out;

        if (mode == "validate") {
            const auto v = run_validate(&c, full, std::cout);
            std::cout << (v.pass ? "validate: all gates passed" : "validate: FAILED") << std::endl;
            return v.pass ? 0 : 4;
        }
        const json report = run(mode, c);
        std::cout << report.dump(2) << std::endl;
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << std::endl;
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "parse error: " << e.what() << std::endl;
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << std::endl;
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}
