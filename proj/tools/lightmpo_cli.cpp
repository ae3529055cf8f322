// lightmpo: run, validate, oracle-check.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "lightmpo/config.hpp"
#include "lightmpo/runner.hpp"

namespace {

struct Common {
    std::string config;
    std::string out;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
    auto* opt = cmd->add_option("--config", c.config, "INI experiment file");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", c.out, "output directory (overrides experiment.output_dir)");
    cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", c.seed, "base seed (overrides experiment.seed)");
}

lightmpo::ExperimentConfig load(const Common& c) {
    auto cfg = lightmpo::load_config(c.config);
    if (!c.out.empty()) cfg.output_dir = c.out;
    if (c.threads) cfg.threads = *c.threads;
    if (c.seed) cfg.seed = *c.seed;
    return cfg;
}

void print(const lightmpo::ValidationReport& rep) {
    for (const auto& e : rep.errors) std::cerr << "error: " << e << '\n';
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& n : rep.notes) std::cerr << "note: " << n << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MPO quantum Fisher information of light emitted by a driven lossy emitter"};
    app.require_subcommand(1);

    Common run_opts, validate_opts, oracle_opts;
    auto* run = app.add_subcommand("run", "evaluate every grid point and write CSV files");
    add_common(run, run_opts, true);
    auto* val = app.add_subcommand("validate", "check a configuration without running it");
    add_common(val, validate_opts, true);

    auto* oracle = app.add_subcommand("oracle-check", "compare MPO results with dense references at small N");
    add_common(oracle, oracle_opts, false);
    lightmpo::OracleCheckOptions oc;
    oracle->add_option("--bins", oc.bins, "bin counts N (each at most 12)")->check(CLI::Range(1, 12));
    oracle->add_option("--eta", oc.etas, "detection efficiencies")->check(CLI::Range(0.0, 1.0));
    oracle->add_option("--omega", oc.omega, "Rabi frequency in units of gamma");
    oracle->add_option("--dt", oc.dt, "bin width")->check(CLI::PositiveNumber);
    oracle->add_option("--restarts", oc.restarts, "MPO-QFI restarts")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const auto cfg = load(run_opts);
            const auto rep = lightmpo::validate(cfg);
            print(rep);
            if (!rep.ok()) return 1;
            const auto summary = lightmpo::run_experiment(cfg, std::cerr);
            for (const auto& f : summary.files) std::cout << f.string() << '\n';
            std::cerr << fmt::format("{} rows, {} flagged, {} errors\n", summary.rows, summary.flagged,
                                     summary.errors);
            return summary.exit_code();
        }
        if (*val) {
            const auto rep = lightmpo::validate(load(validate_opts));
            print(rep);
            if (rep.ok()) std::cout << "ok\n";
            return rep.ok() ? 0 : 1;
        }
        if (*oracle) {
            if (!oracle_opts.config.empty()) {
                const auto cfg = load(oracle_opts);
                if (cfg.kind != lightmpo::Case::rabi) throw lightmpo::ConfigError("oracle-check needs case = rabi");
                oc.gamma = cfg.gamma;
                oc.dt = cfg.dt;
                oc.etas = cfg.etas;
                if (!cfg.thetas.empty()) oc.omega = cfg.thetas.front();
                oc.restarts = cfg.qfi.restarts;
            }
            if (oracle_opts.threads) oc.threads = *oracle_opts.threads;
            if (oracle_opts.seed) oc.seed = *oracle_opts.seed;
            if (!oracle_opts.out.empty()) oc.csv = std::filesystem::path(oracle_opts.out) / "oracle_check.csv";
            const auto rep = lightmpo::oracle_check(oc, std::cout);
            std::cout << (rep.pass() ? "oracle-check: PASS\n" : "oracle-check: FAIL\n");
            return rep.pass() ? 0 : 3;
        }
    } catch (const lightmpo::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
