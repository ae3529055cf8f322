#include "lightmpo/subqfi.hpp"

#include <cmath>

#include <fmt/format.h>

namespace lightmpo {

namespace {

double clamp_radicand(double x, const char* what, bool& clamped) {
    if (x >= 0.0) return x;
    if (x < -1e-10) throw NumericError(fmt::format("{} is negative: {}", what, x));
    clamped = true;
    return 0.0;
}

}  // namespace

SuperFidelityTerms super_fidelity_from_traces(double overlap, double purity1, double purity2) {
    SuperFidelityTerms t;
    t.overlap = overlap;
    t.purity1 = purity1;
    t.purity2 = purity2;
    const double m1 = clamp_radicand(1.0 - purity1, "1 - Tr[rho1^2]", t.clamped);
    const double m2 = clamp_radicand(1.0 - purity2, "1 - Tr[rho2^2]", t.clamped);
    const double outer = clamp_radicand(overlap + std::sqrt(m1 * m2), "super-fidelity radicand", t.clamped);
    t.value = std::sqrt(outer);
    return t;
}

SuperFidelityTerms super_fidelity_terms(const LightStateMPO& rho1, const LightStateMPO& rho2) {
    if (rho1.bins() != rho2.bins())
        throw ConfigurationError(fmt::format("site counts differ: {} vs {}", rho1.bins(), rho2.bins()));
    const double n1 = mpo_trace(rho1), n2 = mpo_trace(rho2);
    return super_fidelity_from_traces(hs_inner(rho1, rho2) / (n1 * n2), hs_inner(rho1, rho1) / (n1 * n1),
                                      hs_inner(rho2, rho2) / (n2 * n2));
}

double super_fidelity(const LightStateMPO& rho1, const LightStateMPO& rho2) {
    return super_fidelity_terms(rho1, rho2).value;
}

namespace {

struct Point {
    double q = 0.0;
    SuperFidelityTerms terms;
};

Point evaluate(const ParametricEmitterModel& model, double theta1, double theta2, double sep, double t_fin,
               double dt) {
    const auto r1 = build_light_mpo(model, theta1, t_fin, dt);
    const auto r2 = build_light_mpo(model, theta2, t_fin, dt);
    Point p;
    p.terms = super_fidelity_terms(r1, r2);
    p.q = 8.0 * (1.0 - p.terms.value) / (sep * sep);
    return p;
}

}  // namespace

SubQfiResult sub_qfi(const ParametricEmitterModel& model, double theta, double t_fin, double dt,
                     const SubQfiOptions& opts) {
    const double eps = opts.eps > 0.0 ? opts.eps : default_fd_step(theta);
    if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigurationError(fmt::format("eps must be positive, got {}", eps));

    SubQfiResult out;
    out.eps = eps;
    if (opts.difference == Difference::one_sided) {
        const auto full = evaluate(model, theta, theta + eps, eps, t_fin, dt);
        const auto half = evaluate(model, theta, theta + 0.5 * eps, 0.5 * eps, t_fin, dt);
        out.value = full.q;
        out.half_step = half.q;
        out.richardson = 2.0 * half.q - full.q;
        out.overlap = full.terms.overlap;
        out.purity1 = full.terms.purity1;
        out.purity2 = full.terms.purity2;
    } else {
        const auto full = evaluate(model, theta - 0.5 * eps, theta + 0.5 * eps, eps, t_fin, dt);
        const auto half = evaluate(model, theta - 0.25 * eps, theta + 0.25 * eps, 0.5 * eps, t_fin, dt);
        out.value = full.q;
        out.half_step = half.q;
        out.richardson = (4.0 * half.q - full.q) / 3.0;
        out.overlap = full.terms.overlap;
        out.purity1 = full.terms.purity1;
        out.purity2 = full.terms.purity2;
    }
    return out;
}

}  // namespace lightmpo
