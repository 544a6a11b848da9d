// Command-line front end: runs one scenario or a sweep from a JSON
// configuration and writes schedules, load curves, and summary reports.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "dsmsim/config.hpp"
#include "dsmsim/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"battery-scheduling simulator for neighbourhood demand-side management"};
    std::string config_path;
    std::string out_dir;
    std::string mode;
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool quiet = false;
    app.add_option("--config", config_path, "path to a JSON run configuration");
    app.add_option("--out", out_dir, "output directory (overrides the config)");
    app.add_option("--mode", mode,
                   "single | sweep-participation | sweep-error | sweep-consumer-mix | "
                   "oracle-check (overrides the config)");
    app.add_option("--seed", seed, "seed override")->each([&](const std::string&) {
        seed_given = true;
    });
    app.add_flag("--quiet", quiet, "suppress progress output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        dsmsim::RunConfig cfg =
            config_path.empty() ? dsmsim::RunConfig{} : dsmsim::load_config_file(config_path);
        if (!mode.empty()) cfg.mode = mode;
        if (seed_given) {
            cfg.seed = seed;
            cfg.solver.seed = seed;
        }
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        dsmsim::run(cfg, cfg.output_dir, quiet);
        return 0;
    } catch (const dsmsim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const dsmsim::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const dsmsim::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
