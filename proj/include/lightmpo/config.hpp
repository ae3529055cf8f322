// config.hpp: INI experiment description. Schema: docs/config.md.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "lightmpo/emitter.hpp"
#include "lightmpo/qfi.hpp"
#include "lightmpo/subqfi.hpp"

namespace lightmpo {

/// Invalid configuration; `what()` carries "file:line: section.key: message" lines.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Method { mpo_qfi, sub_qfi, tsme_qfi, pd_cfi, hd_cfi };

std::string to_string(Method m);

enum class Case { rabi, pulsed };

struct ModelVariant {
    double eta = 1.0;         // rabi
    double gamma_perp = 0.0;  // pulsed
    double nbar = 1.0;        // pulsed
};

struct ExperimentConfig {
    Case kind = Case::rabi;
    std::vector<Method> methods;
    std::uint64_t seed = 0;
    int threads = 1;
    std::filesystem::path output_dir = ".";
    bool write_sweep_trace = false;

    // [model]
    double gamma = 1.0;  // rabi decay rate
    std::vector<double> etas{1.0};
    std::vector<double> gamma_perps{0.0};
    std::vector<double> nbars{1.0};
    double pulse_duration = 0.1;
    double pulse_center = 0.65;

    // [grid]
    std::vector<double> thetas;
    std::vector<double> t_fins;
    double dt = 0.05;

    // [mpo_qfi]
    QfiOptions qfi;
    double delta = 0.0;  // 0 selects 1e-3 |theta|

    // [sub_qfi]
    SubQfiOptions sub;

    // [tsme_qfi]
    double tsme_eps = 0.0;
    double dt_ode = 0.0;

    // [trajectories]
    long n_traj = 2000;
    double traj_dt = 0.001;
    double phi = 1.5707963267948966;

    std::string source = "<config>";
    std::map<std::string, int> lines;  // "section.key" -> line in source

    std::vector<ModelVariant> variants() const;
    ParametricEmitterModel build_model(const ModelVariant& v) const;
};

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    std::vector<std::string> notes;

    bool ok() const { return errors.empty(); }
};

/// Parses the INI file; syntax and type errors throw ConfigError with line numbers.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");

/// Semantic checks: positive tolerances, nonempty grids, integral t_fin / dt,
/// step size against the model timescales.
ValidationReport validate(const ExperimentConfig& config);

}  // namespace lightmpo
