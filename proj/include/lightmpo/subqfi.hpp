// subqfi.hpp: QFI lower bound from the super-fidelity, which needs only
// the overlaps Tr[rho1 rho2], Tr[rho1^2], Tr[rho2^2].

#pragma once

#include "lightmpo/emitter.hpp"
#include "lightmpo/mpo.hpp"

namespace lightmpo {

struct SuperFidelityTerms {
    double overlap = 0.0;  // Tr[rho1 rho2]
    double purity1 = 0.0;
    double purity2 = 0.0;
    double value = 0.0;
    bool clamped = false;  // a slightly negative radicand was set to zero
};

/// F_sup from the three traces. Radicands below -1e-10 raise NumericError.
SuperFidelityTerms super_fidelity_from_traces(double overlap, double purity1, double purity2);

/// Both states are divided by their MPO traces first; the bin-wise Trotter
/// trace defect otherwise swamps 1 - F_sup at long times.
double super_fidelity(const LightStateMPO& rho1, const LightStateMPO& rho2);
SuperFidelityTerms super_fidelity_terms(const LightStateMPO& rho1, const LightStateMPO& rho2);

enum class Difference { one_sided, symmetric };

struct SubQfiOptions {
    double eps = 0.0;  // 0 selects 1e-3 |theta|
    Difference difference = Difference::one_sided;
};

struct SubQfiResult {
    double value = 0.0;       // 8 (1 - F_sup) / eps^2 at eps
    double half_step = 0.0;   // same at eps / 2
    double richardson = 0.0;  // extrapolation of the pair
    double eps = 0.0;
    double overlap = 0.0;  // Tr[rho_theta rho_{theta+eps}]
    double purity1 = 0.0;  // Tr[rho_theta^2]
    double purity2 = 0.0;  // Tr[rho_{theta+eps}^2]
};

/// The three overlaps are taken between trace-normalized states so that the
/// first-order Kraus trace defect O(N dt^2) does not enter 1 - F_sup.
SubQfiResult sub_qfi(const ParametricEmitterModel& model, double theta, double t_fin, double dt,
                     const SubQfiOptions& opts = {});

}  // namespace lightmpo
