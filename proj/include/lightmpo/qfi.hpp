// qfi.hpp: variational MPO-QFI: maximize F = 2 Tr[drho X] - Tr[rho X^2]
// over Hermitian-gauge MPOs X by one-site sweeps and a bond-dimension ramp.

#pragma once

#include <cstdint>
#include <vector>

#include "lightmpo/mpo.hpp"
#include "lightmpo/tensor.hpp"

namespace lightmpo {

/// X as an MPO with sites [l, s, t, r]; in Hermitian gauge every site obeys
/// X[n](l, t, s, r) = conj(X[n](l, s, t, r)), so X is Hermitian.
struct SldMpo {
    OperatorMpo mpo;
    bool hermitian_gauge = true;

    int size() const { return mpo.size(); }
    Index bond_dim() const { return mpo.max_bond(); }
};

struct QfiOptions {
    double eps_tol = 1e-2;          // relative change between sweeps
    double eps_tol_bonddim = 1e-2;  // relative change between D_X steps
    int dx_max = 8;
    int restarts = 1;
    double rank_tol = kDefaultRankTol;  // epsilon_lsq
    std::uint64_t seed = 0;
    int max_sweeps = 200;
    int threads = 1;
    bool record_trace = false;
};

struct SweepTraceRow {
    int restart = 0;
    int bond_dim = 0;
    int sweep = 0;
    double objective = 0.0;
};

struct BondStep {
    int bond_dim = 0;
    double objective = 0.0;  // converged F at this D_X
    int sweeps = 0;
    bool converged = false;
};

struct RestartOutcome {
    double value = 0.0;
    std::vector<BondStep> steps;
    bool converged = true;
    long rank_deficient_solves = 0;
    long rejected_updates = 0;  // local solutions that would have lowered F
    SldMpo sld;
    std::vector<SweepTraceRow> trace;
};

struct QfiResult {
    double value = 0.0;  // max over restarts
    int best_restart = 0;
    std::vector<BondStep> steps;  // of the best restart
    std::vector<double> restart_values;
    double restart_spread = 0.0;  // sample standard deviation over restarts
    bool converged = true;        // all restarts converged
    long rank_deficient_solves = 0;
    long rejected_updates = 0;
    SldMpo sld;
    std::vector<SweepTraceRow> trace;
};

/// F(theta) for a given X. Throws ConfigurationError on mismatched site counts.
double objective(const LightStateMPO& rho, const DerivMpo& drho, const SldMpo& x);

/// Tr[rho X^2].
double second_moment(const OperatorMpo& rho, const OperatorMpo& x);

/// Solves (C + C^T)/2 x = b in the minimum-norm least-squares sense.
LstsqResult<cplx> local_solve(const Vec<cplx>& b, const Mat<cplx>& C, double rank_tol = kDefaultRankTol);

/// X^{s,t} <- (X^{s,t} + conj(X^{t,s})) / 2 on a site tensor [l, s, t, r].
DenseTensor<cplx> hermitize(const DenseTensor<cplx>& site);

/// Random Hermitian-gauge ansatz with the given bond dimension; entries are
/// complex Gaussian of variance 1/(4 D_X) before hermitization.
SldMpo random_sld(int sites, int bond_dim, std::uint64_t seed);

/// Optimizes one restart starting from `start` and ramping D_X to opts.dx_max.
RestartOutcome optimize_sld(const LightStateMPO& rho, const DerivMpo& drho, SldMpo start, const QfiOptions& opts,
                            std::uint64_t seed, int restart_index = 0);

QfiResult compute_qfi(const LightStateMPO& rho, const DerivMpo& drho, const QfiOptions& opts = {});

}  // namespace lightmpo
