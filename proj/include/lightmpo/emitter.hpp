// emitter.hpp: parametric driven-emitter models and their per-bin Kraus
// operators (first order in the bin width, Fock space per bin cut at one photon).
//
// Units: hbar = 1. Rates and frequencies share one unit; the Rabi case uses
// gamma = 1 and the pulsed case Gamma = 1 by convention, so a bin width
// written as "0.05" means 0.05/gamma or 0.05/Gamma respectively.

#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lightmpo {

struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Emitter of dimension `dim` whose Hamiltonian, light coupling J and
/// Lindblad (undetected) channels depend on one real parameter theta.
/// The classical drive is already folded into the Hamiltonian.
struct ParametricEmitterModel {
    int dim = 2;
    std::function<Eigen::MatrixXcd(double t, double theta)> hamiltonian;
    std::function<Eigen::MatrixXcd(double theta)> coupling;
    std::function<std::vector<Eigen::MatrixXcd>(double theta)> lindblads;
    Eigen::VectorXcd initial_state;  // theta independent
    int channels = 0;                // number of Lindblad operators P

    /// Smallest dynamical timescale, used for step-size sanity checks.
    double min_timescale = 1.0;
};

/// Gaussian amplitude phi(t) = (2 pi T^2)^(-1/4) exp(-(t - t_c)^2 / (4 T^2)),
/// scaled by sqrt(mean_photons).
struct PulseEnvelope {
    double duration = 0.1;  // T
    double center = 0.65;   // t_c
    double mean_photons = 1.0;
};

double envelope_value(const PulseEnvelope& pulse, double t);

/// alpha(t) = sqrt(nbar) * phi(t)
double envelope_amplitude(const PulseEnvelope& pulse, double t);

Eigen::MatrixXcd sigma_minus();
Eigen::MatrixXcd sigma_plus();

/// Resonance fluorescence, theta = Omega:
/// H = Omega (s+ + s-), J = sqrt(eta gamma) s-, L = sqrt((1-eta) gamma) s-.
/// The loss channel is omitted when eta == 1.
ParametricEmitterModel build_rabi_model(double gamma, double eta);

/// Pulsed coherent drive, theta = Gamma:
/// H = i Gamma alpha(t) (s+ - s-), J = sqrt(Gamma) s-, L = sqrt(Gamma_perp) s-.
ParametricEmitterModel build_pulsed_model(double gamma_perp, const PulseEnvelope& pulse);

struct KrausOperator {
    std::string label;  // "no-event", "light-photon", "env-photon-k"
    Eigen::MatrixXcd op;
};

struct BinKrausSet {
    int bin = 1;
    double dt = 0.0;
    std::vector<KrausOperator> ops;  // [no-event, light-photon, env-photon-1..P]

    const Eigen::MatrixXcd& no_event() const { return ops[0].op; }
    const Eigen::MatrixXcd& light() const { return ops[1].op; }
    const Eigen::MatrixXcd& env(int k) const { return ops[static_cast<std::size_t>(2 + k)].op; }
    int channels() const { return static_cast<int>(ops.size()) - 2; }
};

/// Kraus operators of the bin [t, t + dt); the Hamiltonian is sampled at the
/// left endpoint t.
BinKrausSet kraus_set(const ParametricEmitterModel& model, double theta, double t, double dt);

/// ||sum_k A_k^dagger A_k - I||_2
double completeness_defect(const BinKrausSet& set);

}  // namespace lightmpo
