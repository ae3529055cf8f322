#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "lightmpo/dense_oracle.hpp"
#include "lightmpo/mpo.hpp"
#include "lightmpo/tsme.hpp"

using namespace lightmpo;

namespace {

// Two-sided Liouvillian on row-major vec(r): vec(A r B) = (A kron B^T) vec(r).
Eigen::MatrixXcd liouvillian(const ParametricEmitterModel& m, double th1, double th2) {
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(2, 2);
    auto kron = [](const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
        Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = 0; j < a.cols(); ++j)
                out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        return out;
    };
    const cplx i(0.0, 1.0);
    const Eigen::MatrixXcd h1 = m.hamiltonian(0.0, th1), h2 = m.hamiltonian(0.0, th2);
    const Eigen::MatrixXcd j1 = m.coupling(th1), j2 = m.coupling(th2);
    Eigen::MatrixXcd d1 = j1.adjoint() * j1, d2 = j2.adjoint() * j2;
    const auto l1 = m.lindblads(th1), l2 = m.lindblads(th2);
    Eigen::MatrixXcd out = -i * (kron(h1, id) - kron(id, h2.transpose())) + kron(j1, j2.conjugate());
    for (std::size_t k = 0; k < l1.size(); ++k) {
        out += kron(l1[k], l2[k].conjugate());
        d1 += l1[k].adjoint() * l1[k];
        d2 += l2[k].adjoint() * l2[k];
    }
    out -= 0.5 * (kron(d1, id) + kron(id, d2.transpose()));
    return out;
}

Eigen::MatrixXcd expm_solution(const ParametricEmitterModel& m, double th1, double th2, double t) {
    Eigen::MatrixXcd r0 = m.initial_state * m.initial_state.adjoint();
    Eigen::VectorXcd v(4);
    v << r0(0, 0), r0(0, 1), r0(1, 0), r0(1, 1);
    const Eigen::MatrixXcd e = (liouvillian(m, th1, th2) * t).exp();
    const Eigen::VectorXcd w = e * v;
    Eigen::MatrixXcd r(2, 2);
    r << w(0), w(1), w(2), w(3);
    return r;
}

}  // namespace

TEST(Tsme, NoDriveStaysInGround) {
    const auto m = build_rabi_model(1.0, 0.5);
    const auto s = solve_master_equation(m, 0.0, 5.0, 1e-2);
    Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(2, 2);
    g(0, 0) = 1.0;
    for (const auto& r : s.states) EXPECT_LT((r - g).norm(), 1e-15);
}

TEST(Tsme, MasterEquationPreservesTrace) {
    const auto s = solve_master_equation(build_rabi_model(1.0, 0.5), 0.1, 10.0, 1e-3);
    for (const auto& r : s.states) EXPECT_NEAR(r.trace().real(), 1.0, 1e-8);
}

TEST(Tsme, MatchesMatrixExponential) {
    for (double eta : {0.2, 1.0}) {
        const auto m = build_rabi_model(1.0, eta);
        const auto s = solve_tsme(m, 0.3, 0.35, 4.0, 1e-3);
        EXPECT_LT((s.final() - expm_solution(m, 0.3, 0.35, 4.0)).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Tsme, TraceBoundedByTraceNorm) {
    const auto s = solve_tsme(build_rabi_model(1.0, 0.5), 0.3, 0.5, 3.0, 1e-3);
    const double tn = trace_norm<cplx>(s.final());
    EXPECT_LE(std::abs(s.final().trace()), tn + 1e-12);
    EXPECT_LE(tn, 1.0 + 1e-10);
}

TEST(TsmeFidelity, ZeroSeparationIsOne) {
    EXPECT_NEAR(tsme_fidelity(build_rabi_model(1.0, 0.5), 0.1, 0.0, 5.0, 1e-3), 1.0, 1e-10);
}

TEST(TsmeFidelity, DriveFreeModelIsOne) {
    auto m = build_rabi_model(1.0, 0.5);
    m.hamiltonian = [](double, double) -> Eigen::MatrixXcd { return Eigen::MatrixXcd::Zero(2, 2); };
    EXPECT_NEAR(tsme_fidelity(m, 0.1, 0.05, 5.0, 1e-3), 1.0, 1e-12);
}

class DiscreteTsme : public ::testing::TestWithParam<int> {};

TEST_P(DiscreteTsme, TraceNormEqualsDenseFidelity) {
    const int n = GetParam();
    const auto m = build_rabi_model(1.0, 0.5);
    const double dt = 0.05, th1 = 0.3, th2 = 0.6;
    const double tn = trace_norm<cplx>(solve_tsme_discrete(m, th1, th2, n, dt));
    const double f = exact_fidelity(dense_light_env_state(m, th1, n, dt), dense_light_env_state(m, th2, n, dt));
    EXPECT_NEAR(tn, f, 1e-8);
}

INSTANTIATE_TEST_SUITE_P(SmallChains, DiscreteTsme, ::testing::Values(1, 3, 6));

TEST(DiscreteTsme, ConvergesToContinuous) {
    const auto m = build_rabi_model(1.0, 0.5);
    const Eigen::MatrixXcd c = solve_tsme(m, 0.3, 0.4, 2.0, 1e-3).final();
    const double a = (solve_tsme_discrete(m, 0.3, 0.4, 40, 0.05) - c).norm();
    const double b = (solve_tsme_discrete(m, 0.3, 0.4, 80, 0.025) - c).norm();
    EXPECT_LT(b, 0.6 * a);
}

TEST(TsmeQfi, ThetaIndependentModelIsZero) {
    auto m = build_rabi_model(1.0, 0.5);
    m.hamiltonian = [](double, double) -> Eigen::MatrixXcd { return 0.2 * (sigma_plus() + sigma_minus()); };
    EXPECT_NEAR(tsme_qfi(m, 0.1, 0.0, 5.0).value, 0.0, 1e-4);
}

TEST(TsmeQfi, IndependentOfEfficiency) {
    const double ref = tsme_qfi(build_rabi_model(1.0, 0.2), 0.1, 0.0, 10.0).value;
    for (double eta : {0.5, 0.8})
        EXPECT_NEAR(tsme_qfi(build_rabi_model(1.0, eta), 0.1, 0.0, 10.0).value, ref, 1e-8 * ref);
}

TEST(TsmeQfi, SeriesMatchesSinglePoints) {
    const auto m = build_rabi_model(1.0, 0.5);
    const auto series = tsme_qfi_series(m, 0.2, 0.0, {1.0, 2.5, 4.0});
    ASSERT_EQ(series.size(), 3u);
    EXPECT_NEAR(series[1].value, tsme_qfi(m, 0.2, 0.0, 2.5).value, 1e-9 * series[1].value);
    EXPECT_LT(series[0].value, series[2].value);
    for (const auto& r : series) EXPECT_FALSE(r.accuracy_warning) << r.warning;
}

TEST(TsmeQfi, RejectsUnsortedSeries) {
    EXPECT_THROW(tsme_qfi_series(build_rabi_model(1.0, 0.5), 0.2, 0.0, {2.0, 1.0}), ConfigurationError);
}
