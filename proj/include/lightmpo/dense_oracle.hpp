// dense_oracle.hpp: brute-force reference: explicit 2^N-dimensional light
// states built by direct Kraus-chain evolution, exact QFI and fidelities.
// Exists for cross-checking the MPO routines; no attention paid to speed.

#pragma once

#include <stdexcept>

#include <Eigen/Dense>

#include "lightmpo/emitter.hpp"

namespace lightmpo {

struct ResourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DenseState {
    Eigen::MatrixXcd rho;
    int bins = 0;
    double dt = 0.0;
};

/// Light state of N bins (N <= 12); basis |s_1 ... s_N>, bin 1 most significant.
DenseState dense_light_state(const ParametricEmitterModel& model, double theta, int bins, double dt);

/// Central difference (rho(theta + delta) - rho(theta - delta)) / (2 delta).
Eigen::MatrixXcd dense_light_derivative(const ParametricEmitterModel& model, double theta, double delta, int bins,
                                        double dt);

/// Joint light + environment state with the emitter traced out (N <= 6).
/// Each bin carries P + 2 levels: vacuum, one light photon, one photon in
/// environment channel k.
Eigen::MatrixXcd dense_light_env_state(const ParametricEmitterModel& model, double theta, int bins, double dt);

struct ExactQfi {
    double value = 0.0;
    Eigen::MatrixXcd sld;
};

/// Q = sum_{l_i + l_j > tol} 2 |<i|drho|j>|^2 / (l_i + l_j), SLD in the original basis.
ExactQfi exact_qfi(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& drho, double tol = 1e-12);

/// Uhlmann fidelity ||sqrt(rho1) sqrt(rho2)||_1; eigenvalues clamped at zero.
double exact_fidelity(const Eigen::MatrixXcd& rho1, const Eigen::MatrixXcd& rho2);

Eigen::MatrixXcd psd_sqrt(const Eigen::MatrixXcd& rho);

}  // namespace lightmpo
