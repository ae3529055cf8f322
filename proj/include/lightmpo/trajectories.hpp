// trajectories.hpp: conditional emitter dynamics under continuous
// photodetection (pd) or homodyne detection (hd), co-integrated with the
// monitoring operator tau whose trace is the score of the measurement record.
//
// Each step applies normalized first-order measurement operators
//   S = A^dag A + dt J^dag J + dt sum L^dag L,
//   A~ = A S^-1/2, J~ = sqrt(dt) J S^-1/2, L~ = sqrt(dt) L S^-1/2,
// so the outcome probabilities sum to one at every theta and the update is
// positivity preserving. Homodyne uses M(dy) = A~ + dy e^{i phi} J S^-1/2
// with dy drawn exactly from g(dy) Tr[M rho M^dag + sum L~ rho L~^dag],
// g the N(0, dt) density.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lightmpo/emitter.hpp"

namespace lightmpo {

enum class Detection { pd, hd };

std::string to_string(Detection d);
Detection parse_detection(const std::string& s);

struct TrajectoryRecord {
    std::uint64_t seed = 0;
    Detection method = Detection::pd;
    double t_fin = 0.0;
    double theta = 0.0;
    double phi = 0.0;
    double dt = 0.0;
    double tr_tau = 0.0;  // score d/dtheta log p(record)
    long jumps = 0;
    std::uint64_t record_hash = 0;  // FNV-1a over jump steps (pd) or dy bits (hd)
    double sum_dw2 = 0.0;           // quadratic variation of the innovation (hd)
    double sum_dy = 0.0;
    std::vector<double> jump_times;              // pd, when kept
    std::vector<double> dy;                      // hd, when kept
    std::vector<Eigen::MatrixXcd> checkpoints;  // conditional states at requested times
};

struct CfiEstimate {
    double cfi = 0.0;  // mean of (Tr tau)^2
    double stderr_cfi = 0.0;
    long count = 0;
    double mean_tr_tau = 0.0;
    double stderr_tr_tau = 0.0;
};

struct TrajectoryOptions {
    double phi = 0.0;      // homodyne angle
    double fd_step = 0.0;  // theta step for operator derivatives; 0 selects 1e-5 |theta|
    bool keep_record = false;
    std::vector<double> checkpoint_times;
};

/// Per-step operators shared by all trajectories of one configuration.
class TrajectoryKernel {
public:
    TrajectoryKernel(const ParametricEmitterModel& model, double theta, double t_fin, double dt, Detection method,
                     const TrajectoryOptions& opts = {});
    ~TrajectoryKernel();
    TrajectoryKernel(TrajectoryKernel&&) noexcept;
    TrajectoryKernel& operator=(TrajectoryKernel&&) noexcept;

    TrajectoryRecord simulate(std::uint64_t seed) const;

    Detection method() const;
    long steps() const;
    double dt() const;

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

TrajectoryRecord simulate_pd(const ParametricEmitterModel& model, double theta, double t_fin, double dt,
                             std::uint64_t seed);
TrajectoryRecord simulate_hd(const ParametricEmitterModel& model, double theta, double phi, double t_fin, double dt,
                             std::uint64_t seed);

/// Requires at least two records of one configuration.
CfiEstimate estimate_cfi(const std::vector<TrajectoryRecord>& records);

struct EnsembleResult {
    std::vector<TrajectoryRecord> records;  // in index order
    CfiEstimate cfi;
    std::vector<double> checkpoint_times;
    std::vector<Eigen::MatrixXcd> mean_state;  // per checkpoint
    std::vector<Eigen::MatrixXd> stderr_real;  // entrywise standard error of Re
    std::vector<Eigen::MatrixXd> stderr_imag;  // and of Im
};

/// n_traj trajectories with seeds derive_seed(seed, i), spread over `threads` workers.
EnsembleResult run_ensemble(const ParametricEmitterModel& model, double theta, double t_fin, double dt,
                            Detection method, long n_traj, std::uint64_t seed, int threads = 1,
                            const TrajectoryOptions& opts = {});

}  // namespace lightmpo
