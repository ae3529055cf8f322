#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "lightmpo/emitter.hpp"

using namespace lightmpo;

TEST(RabiModel, CouplingsAtHalfEfficiency) {
    const auto m = build_rabi_model(1.0, 0.5);
    const Eigen::MatrixXcd sm = sigma_minus();
    EXPECT_LT((m.coupling(0.1) - std::sqrt(0.5) * sm).norm(), 1e-15);
    const auto ls = m.lindblads(0.1);
    ASSERT_EQ(ls.size(), 1u);
    EXPECT_LT((ls[0] - std::sqrt(0.5) * sm).norm(), 1e-15);
    EXPECT_LT((m.hamiltonian(0.0, 0.1) - 0.1 * (sm + sm.adjoint())).norm(), 1e-15);
}

TEST(RabiModel, NoDriveNoLoss) {
    const auto m = build_rabi_model(1.0, 1.0);
    EXPECT_EQ(m.hamiltonian(0.0, 0.0).norm(), 0.0);
    EXPECT_TRUE(m.lindblads(0.0).empty());
    EXPECT_EQ(m.channels, 0);
}

TEST(RabiModel, ZeroEfficiencySendsEverythingToEnvironment) {
    const auto m = build_rabi_model(1.0, 0.0);
    EXPECT_EQ(m.coupling(0.3).norm(), 0.0);
    EXPECT_LT((m.lindblads(0.3)[0] - sigma_minus()).norm(), 1e-15);
}

TEST(RabiModel, RejectsBadEfficiency) {
    EXPECT_THROW(build_rabi_model(1.0, 1.5), DomainError);
    EXPECT_THROW(build_rabi_model(-1.0, 0.5), DomainError);
}

TEST(PulsedModel, NoPhotonsStaysInVacuum) {
    PulseEnvelope p;
    p.mean_photons = 0.0;
    const auto m = build_pulsed_model(0.0, p);
    for (double t : {0.0, 0.5, 0.65, 1.0}) EXPECT_EQ(m.hamiltonian(t, 1.0).norm(), 0.0);
    const auto k = kraus_set(m, 1.0, 0.65, 0.01);
    const Eigen::VectorXcd g = m.initial_state;
    EXPECT_LT((k.light() * g).norm(), 1e-15);
    EXPECT_LT((k.no_event() * g - g).norm(), 1e-15);
}

TEST(PulsedModel, ReproducesRabiParametrization) {
    // gamma = Gamma + Gamma_perp, eta = Gamma / gamma
    PulseEnvelope p;
    const double rate = 0.7, perp = 0.3;
    const auto pulsed = build_pulsed_model(perp, p);
    const auto rabi = build_rabi_model(rate + perp, rate / (rate + perp));
    EXPECT_LT((pulsed.coupling(rate) - rabi.coupling(0.0)).norm(), 1e-15);
    EXPECT_LT((pulsed.lindblads(rate)[0] - rabi.lindblads(0.0)[0]).norm(), 1e-15);
}

TEST(Envelope, PeakValue) {
    PulseEnvelope p;
    EXPECT_NEAR(envelope_value(p, p.center), std::pow(2.0 * std::numbers::pi * 0.01, -0.25), 1e-14);
}

TEST(Envelope, GaussianTail) {
    PulseEnvelope p;
    EXPECT_LT(envelope_value(p, p.center + 10 * p.duration), 1e-10 * envelope_value(p, p.center));
}

TEST(Envelope, UnitNorm) {
    PulseEnvelope p;
    const double a = p.center - 8 * p.duration, b = p.center + 8 * p.duration;
    const int n = 4000;
    const double h = (b - a) / n;
    double s = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double v = envelope_value(p, a + k * h);
        s += (k == 0 || k == n ? 1.0 : (k % 2 ? 4.0 : 2.0)) * v * v;
    }
    EXPECT_NEAR(s * h / 3.0, 1.0, 1e-6);
}

TEST(Kraus, GroundStateEmitsNothingWithoutDrive) {
    const auto m = build_rabi_model(1.0, 0.5);
    const auto k = kraus_set(m, 0.0, 0.0, 0.05);
    EXPECT_LT((k.light() * m.initial_state).norm(), 1e-15);
}

TEST(Kraus, PerfectEfficiencyHasTwoOperators) {
    const auto k = kraus_set(build_rabi_model(1.0, 1.0), 0.1, 0.0, 0.05);
    EXPECT_EQ(k.ops.size(), 2u);
    EXPECT_EQ(k.channels(), 0);
}

TEST(Kraus, CompletenessDefectIsSecondOrder) {
    const auto m = build_rabi_model(1.0, 0.5);
    const double a = completeness_defect(kraus_set(m, 0.1, 0.0, 0.05));
    const double b = completeness_defect(kraus_set(m, 0.1, 0.0, 0.025));
    EXPECT_NEAR(a / b, 4.0, 0.05);
}
