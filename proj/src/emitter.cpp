#include "lightmpo/emitter.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "lightmpo/tensor.hpp"

namespace lightmpo {

double envelope_value(const PulseEnvelope& pulse, double t) {
    const double T = pulse.duration;
    const double x = t - pulse.center;
    return std::pow(2.0 * std::numbers::pi * T * T, -0.25) * std::exp(-x * x / (4.0 * T * T));
}

double envelope_amplitude(const PulseEnvelope& pulse, double t) {
    return std::sqrt(pulse.mean_photons) * envelope_value(pulse, t);
}

Eigen::MatrixXcd sigma_minus() {
    // basis order (|g>, |e>)
    Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(2, 2);
    s(0, 1) = 1.0;
    return s;
}

Eigen::MatrixXcd sigma_plus() { return sigma_minus().adjoint(); }

namespace {

Eigen::VectorXcd ground_state() {
    Eigen::VectorXcd g = Eigen::VectorXcd::Zero(2);
    g(0) = 1.0;
    return g;
}

}  // namespace

ParametricEmitterModel build_rabi_model(double gamma, double eta) {
    if (!(gamma >= 0.0)) throw DomainError(fmt::format("decay rate must be nonnegative, got {}", gamma));
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError(fmt::format("efficiency must lie in [0,1], got {}", eta));

    ParametricEmitterModel m;
    m.dim = 2;
    m.initial_state = ground_state();
    m.channels = eta < 1.0 ? 1 : 0;
    m.min_timescale = gamma > 0 ? 1.0 / gamma : 1.0;
    const Eigen::MatrixXcd sx = sigma_plus() + sigma_minus();
    m.hamiltonian = [sx](double, double omega) -> Eigen::MatrixXcd { return omega * sx; };
    const double j = std::sqrt(eta * gamma);
    m.coupling = [j](double) -> Eigen::MatrixXcd { return j * sigma_minus(); };
    const double l = std::sqrt((1.0 - eta) * gamma);
    const int channels = m.channels;
    m.lindblads = [l, channels](double) {
        std::vector<Eigen::MatrixXcd> ops;
        if (channels > 0) ops.push_back(l * sigma_minus());
        return ops;
    };
    return m;
}

ParametricEmitterModel build_pulsed_model(double gamma_perp, const PulseEnvelope& pulse) {
    if (!(gamma_perp >= 0.0))
        throw DomainError(fmt::format("undetected rate must be nonnegative, got {}", gamma_perp));
    if (!(pulse.duration > 0.0)) throw DomainError("pulse duration must be positive");
    if (!(pulse.mean_photons >= 0.0)) throw DomainError("mean photon number must be nonnegative");

    ParametricEmitterModel m;
    m.dim = 2;
    m.initial_state = ground_state();
    m.channels = 1;
    m.min_timescale = std::min(1.0, pulse.duration);
    const Eigen::MatrixXcd drive = cplx(0.0, 1.0) * (sigma_plus() - sigma_minus());
    m.hamiltonian = [drive, pulse](double t, double rate) -> Eigen::MatrixXcd {
        return rate * envelope_amplitude(pulse, t) * drive;
    };
    m.coupling = [](double rate) -> Eigen::MatrixXcd {
        if (rate < 0.0) throw DomainError(fmt::format("coupling rate must be nonnegative, got {}", rate));
        return std::sqrt(rate) * sigma_minus();
    };
    const double l = std::sqrt(gamma_perp);
    m.lindblads = [l](double) { return std::vector<Eigen::MatrixXcd>{l * sigma_minus()}; };
    return m;
}

BinKrausSet kraus_set(const ParametricEmitterModel& model, double theta, double t, double dt) {
    if (!(dt > 0.0)) throw DomainError("bin width must be positive");
    const Eigen::MatrixXcd H = model.hamiltonian(t, theta);
    const Eigen::MatrixXcd J = model.coupling(theta);
    const auto Ls = model.lindblads(theta);

    Eigen::MatrixXcd decay = J.adjoint() * J;
    for (const auto& L : Ls) decay += L.adjoint() * L;

    BinKrausSet set;
    set.bin = static_cast<int>(std::lround(t / dt)) + 1;
    set.dt = dt;
    const auto I = Eigen::MatrixXcd::Identity(model.dim, model.dim);
    set.ops.push_back({"no-event", I - cplx(0.0, dt) * H - 0.5 * dt * decay});
    set.ops.push_back({"light-photon", std::sqrt(dt) * J});
    for (std::size_t k = 0; k < Ls.size(); ++k)
        set.ops.push_back({fmt::format("env-photon-{}", k + 1), std::sqrt(dt) * Ls[k]});
    return set;
}

double completeness_defect(const BinKrausSet& set) {
    const Index d = set.ops.front().op.rows();
    Eigen::MatrixXcd sum = -Eigen::MatrixXcd::Identity(d, d);
    for (const auto& k : set.ops) sum += k.op.adjoint() * k.op;
    return svd<cplx>(sum).S(0);
}

}  // namespace lightmpo
