#include "lightmpo/tsme.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "lightmpo/mpo.hpp"
#include "lightmpo/tensor.hpp"

namespace lightmpo {

namespace {

struct SideOps {
    Eigen::MatrixXcd J;
    std::vector<Eigen::MatrixXcd> L;
    Eigen::MatrixXcd decay;  // J^dag J + sum L^dag L
};

SideOps side_ops(const ParametricEmitterModel& model, double theta) {
    SideOps s;
    s.J = model.coupling(theta);
    s.L = model.lindblads(theta);
    s.decay = s.J.adjoint() * s.J;
    for (const auto& l : s.L) s.decay += l.adjoint() * l;
    return s;
}

class Generator {
public:
    Generator(const ParametricEmitterModel& model, double theta1, double theta2)
        : model_(model), theta1_(theta1), theta2_(theta2), a_(side_ops(model, theta1)), b_(side_ops(model, theta2)) {
        if (a_.L.size() != b_.L.size()) throw DomainError("channel count depends on theta");
    }

    Eigen::MatrixXcd operator()(double t, const Eigen::MatrixXcd& r) const {
        const cplx i(0.0, 1.0);
        const Eigen::MatrixXcd H1 = model_.hamiltonian(t, theta1_);
        const Eigen::MatrixXcd H2 = model_.hamiltonian(t, theta2_);
        Eigen::MatrixXcd out = -i * (H1 * r - r * H2) + a_.J * r * b_.J.adjoint() - 0.5 * (a_.decay * r + r * b_.decay);
        for (std::size_t k = 0; k < a_.L.size(); ++k) out += a_.L[k] * r * b_.L[k].adjoint();
        return out;
    }

private:
    const ParametricEmitterModel& model_;
    double theta1_, theta2_;
    SideOps a_, b_;
};

Eigen::MatrixXcd rk4(const Generator& f, Eigen::MatrixXcd r, double t0, double t1, double dt,
                     std::vector<double>* times = nullptr, std::vector<Eigen::MatrixXcd>* states = nullptr) {
    const double span = t1 - t0;
    if (span <= 0.0) return r;
    const long steps = std::max(1L, static_cast<long>(std::ceil(span / dt - 1e-9)));
    const double h = span / static_cast<double>(steps);
    for (long k = 0; k < steps; ++k) {
        const double t = t0 + static_cast<double>(k) * h;
        const Eigen::MatrixXcd k1 = f(t, r);
        const Eigen::MatrixXcd k2 = f(t + 0.5 * h, r + 0.5 * h * k1);
        const Eigen::MatrixXcd k3 = f(t + 0.5 * h, r + 0.5 * h * k2);
        const Eigen::MatrixXcd k4 = f(t + h, r + h * k3);
        r += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (times) {
            times->push_back(t0 + static_cast<double>(k + 1) * h);
            states->push_back(r);
        }
    }
    return r;
}

Eigen::MatrixXcd initial_rho(const ParametricEmitterModel& model) {
    return model.initial_state * model.initial_state.adjoint();
}

void check_step(double t_fin, double dt_ode) {
    if (!(t_fin >= 0.0)) throw ConfigurationError(fmt::format("final time must be nonnegative, got {}", t_fin));
    if (!(dt_ode > 0.0)) throw ConfigurationError(fmt::format("integrator step must be positive, got {}", dt_ode));
}

// Trace-norm fidelities at each requested time for the pair (theta, theta + eps).
std::vector<double> fidelity_series(const ParametricEmitterModel& model, double theta, double eps,
                                    const std::vector<double>& t_fins, double dt_ode) {
    const Generator f(model, theta, theta + eps);
    Eigen::MatrixXcd r = initial_rho(model);
    double t = 0.0;
    std::vector<double> out;
    for (double tf : t_fins) {
        r = rk4(f, r, t, tf, dt_ode);
        t = tf;
        out.push_back(trace_norm<cplx>(r));
    }
    return out;
}

}  // namespace

TwoSidedState solve_tsme(const ParametricEmitterModel& model, double theta1, double theta2, double t_fin,
                         double dt_ode) {
    check_step(t_fin, dt_ode);
    TwoSidedState s;
    s.theta1 = theta1;
    s.theta2 = theta2;
    s.times.push_back(0.0);
    s.states.push_back(initial_rho(model));
    rk4(Generator(model, theta1, theta2), s.states.front(), 0.0, t_fin, dt_ode, &s.times, &s.states);
    return s;
}

Eigen::MatrixXcd solve_tsme_discrete(const ParametricEmitterModel& model, double theta1, double theta2, int bins,
                                     double dt) {
    if (bins < 0) throw ConfigurationError("bin count must be nonnegative");
    Eigen::MatrixXcd r = initial_rho(model);
    for (int n = 0; n < bins; ++n) {
        const auto a = kraus_set(model, theta1, n * dt, dt);
        const auto b = kraus_set(model, theta2, n * dt, dt);
        Eigen::MatrixXcd next = Eigen::MatrixXcd::Zero(r.rows(), r.cols());
        for (std::size_t k = 0; k < a.ops.size(); ++k) next += a.ops[k].op * r * b.ops[k].op.adjoint();
        r = std::move(next);
    }
    return r;
}

double default_ode_step(const ParametricEmitterModel& model, double theta) {
    double scale = model.min_timescale;
    if (theta != 0.0) scale = std::min(scale, 1.0 / std::abs(theta));
    return std::min(1e-3, 0.01 * scale);
}

double tsme_fidelity(const ParametricEmitterModel& model, double theta, double eps, double t_fin, double dt_ode) {
    check_step(t_fin, dt_ode);
    return fidelity_series(model, theta, eps, {t_fin}, dt_ode).front();
}

std::vector<TsmeQfiResult> tsme_qfi_series(const ParametricEmitterModel& model, double theta, double eps,
                                           const std::vector<double>& t_fins, double dt_ode) {
    if (t_fins.empty()) return {};
    if (!std::is_sorted(t_fins.begin(), t_fins.end()))
        throw ConfigurationError("final times must be given in ascending order");
    if (eps <= 0.0) eps = default_fd_step(theta);
    if (dt_ode <= 0.0) dt_ode = default_ode_step(model, theta);
    check_step(t_fins.front(), dt_ode);

    const auto full = fidelity_series(model, theta, eps, t_fins, dt_ode);
    const auto half = fidelity_series(model, theta, 0.5 * eps, t_fins, dt_ode);
    const auto fine = fidelity_series(model, theta, eps, t_fins, 0.5 * dt_ode);

    std::vector<TsmeQfiResult> out;
    for (std::size_t k = 0; k < t_fins.size(); ++k) {
        TsmeQfiResult r;
        r.eps = eps;
        r.dt_ode = dt_ode;
        r.fidelity = full[k];
        r.value = 8.0 * (1.0 - full[k]) / (eps * eps);
        r.half_step = 8.0 * (1.0 - half[k]) / (0.25 * eps * eps);
        r.richardson = 2.0 * r.half_step - r.value;
        const double q_fine = 8.0 * (1.0 - fine[k]) / (eps * eps);
        const double scale = std::max(std::abs(r.value), std::abs(q_fine));
        r.halving_change = scale > 0.0 ? std::abs(q_fine - r.value) / scale : 0.0;
        if (r.halving_change > 1e-3) {
            r.accuracy_warning = true;
            r.warning = fmt::format("halving the integrator step changes the QFI by {:.2e} (relative)", r.halving_change);
        }
        out.push_back(r);
    }
    return out;
}

TsmeQfiResult tsme_qfi(const ParametricEmitterModel& model, double theta, double eps, double t_fin, double dt_ode) {
    return tsme_qfi_series(model, theta, eps, {t_fin}, dt_ode).front();
}

}  // namespace lightmpo
