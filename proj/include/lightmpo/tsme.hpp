// tsme.hpp: two-sided master equation for the mixed-parameter operator
// rho~_{theta1,theta2}; its trace norm is the fidelity between the
// light+environment states, giving an upper bound on the light-only QFI.

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lightmpo/emitter.hpp"

namespace lightmpo {

struct TwoSidedState {
    double theta1 = 0.0;
    double theta2 = 0.0;
    std::vector<double> times;
    std::vector<Eigen::MatrixXcd> states;  // one per entry of `times`, t = 0 included

    const Eigen::MatrixXcd& final() const { return states.back(); }
};

/// d rho~/dt = -i(H1 rho~ - rho~ H2) + J1 rho~ J2^dag - (J1^dag J1 rho~ + rho~ J2^dag J2)/2
///             + the same two-sided form for every Lindblad channel.
/// Classical fourth-order Runge-Kutta with ceil(t_fin / dt_ode) equal steps.
TwoSidedState solve_tsme(const ParametricEmitterModel& model, double theta1, double theta2, double t_fin,
                         double dt_ode);

/// Ordinary master equation (theta1 = theta2).
inline TwoSidedState solve_master_equation(const ParametricEmitterModel& model, double theta, double t_fin,
                                           double dt_ode) {
    return solve_tsme(model, theta, theta, t_fin, dt_ode);
}

/// Bin-by-bin two-sided Kraus map sum_k K_k(theta1) rho~ K_k(theta2)^dag with
/// the same first-order operators used for the light MPO.
Eigen::MatrixXcd solve_tsme_discrete(const ParametricEmitterModel& model, double theta1, double theta2, int bins,
                                     double dt);

/// Default integrator step: 0.01 of the shortest timescale (1/theta included), at most 1e-3.
double default_ode_step(const ParametricEmitterModel& model, double theta);

double tsme_fidelity(const ParametricEmitterModel& model, double theta, double eps, double t_fin, double dt_ode);

struct TsmeQfiResult {
    double value = 0.0;       // 8 (1 - F) / eps^2
    double half_step = 0.0;   // same at eps / 2
    double richardson = 0.0;  // 2 Q(eps/2) - Q(eps)
    double fidelity = 0.0;
    double eps = 0.0;
    double dt_ode = 0.0;
    double halving_change = 0.0;  // relative change of Q when dt_ode is halved
    bool accuracy_warning = false;
    std::string warning;
};

/// eps <= 0 selects 1e-3 |theta|; dt_ode <= 0 selects default_ode_step.
TsmeQfiResult tsme_qfi(const ParametricEmitterModel& model, double theta, double eps, double t_fin,
                       double dt_ode = 0.0);

/// Values at several final times from one integration per parameter pair.
std::vector<TsmeQfiResult> tsme_qfi_series(const ParametricEmitterModel& model, double theta, double eps,
                                           const std::vector<double>& t_fins, double dt_ode = 0.0);

}  // namespace lightmpo
