// runner.hpp: batch execution of an ExperimentConfig and the dense
// oracle cross-check behind `lightmpo oracle-check`.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lightmpo/config.hpp"

namespace lightmpo {

struct RunSummary {
    long rows = 0;
    long flagged = 0;  // non-converged or accuracy warnings
    long errors = 0;   // engine failures; rows carry status=error
    std::vector<std::filesystem::path> files;

    int exit_code() const { return errors > 0 ? 2 : 0; }
};

/// Runs every (method, variant, theta, t_fin) point and writes the CSV
/// files into config.output_dir. Rows are ordered by grid position, not
/// by completion. Progress and warnings go to `log`.
RunSummary run_experiment(const ExperimentConfig& config, std::ostream& log);

struct OracleCheckOptions {
    std::vector<int> bins{4, 6, 8};
    std::vector<double> etas{0.5, 1.0};
    double omega = 0.1;
    double gamma = 1.0;
    double dt = 0.05;
    int restarts = 20;
    std::uint64_t seed = 0;
    int threads = 1;
    std::filesystem::path csv;  // empty: no file
};

struct OracleCheckRow {
    int bins = 0;
    double eta = 0.0;
    double reconstruction_error = 0.0;  // max entrywise |rho_mpo - rho_dense|
    double derivative_error = 0.0;
    double exact_qfi = 0.0;
    double mpo_qfi = 0.0;
    double qfi_rel_error = 0.0;
    double sub_qfi = 0.0;
    double dense_sub_qfi = 0.0;
    double sub_rel_error = 0.0;
    bool pass = false;
};

struct OracleCheckReport {
    std::vector<OracleCheckRow> rows;
    bool pass() const;
};

inline constexpr double kOracleReconstructionTol = 1e-12;
inline constexpr double kOracleQfiTol = 1e-2;
inline constexpr double kOracleSubTol = 5e-3;

OracleCheckReport oracle_check(const OracleCheckOptions& opts, std::ostream& log);

}  // namespace lightmpo
