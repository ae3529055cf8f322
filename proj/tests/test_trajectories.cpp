#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "lightmpo/mpo.hpp"
#include "lightmpo/trajectories.hpp"
#include "lightmpo/tsme.hpp"

using namespace lightmpo;

namespace {

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

// Integral over [0, t_fin] of Tr[O rho(t)] along the master equation, trapezoid rule.
double integrated_expectation(const ParametricEmitterModel& m, double theta, double t_fin, double dt,
                              const Eigen::MatrixXcd& o) {
    const auto s = solve_master_equation(m, theta, t_fin, dt);
    double acc = 0.0;
    for (std::size_t k = 1; k < s.states.size(); ++k)
        acc += 0.5 * (s.times[k] - s.times[k - 1]) *
               ((o * s.states[k]).trace().real() + (o * s.states[k - 1]).trace().real());
    return acc;
}

}  // namespace

TEST(Detection, Names) {
    EXPECT_EQ(to_string(Detection::pd), "pd");
    EXPECT_EQ(parse_detection("hd"), Detection::hd);
    EXPECT_THROW(parse_detection("xx"), std::invalid_argument);
}

TEST(Photodetection, NoDriveNoJumps) {
    const auto m = build_rabi_model(1.0, 1.0);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto r = simulate_pd(m, 0.0, 5.0, 0.01, s);
        EXPECT_EQ(r.jumps, 0);
        EXPECT_NEAR(r.tr_tau, 0.0, 1e-9);
    }
}

TEST(Photodetection, SameSeedSameRecord) {
    const auto m = build_rabi_model(1.0, 0.5);
    const auto a = simulate_pd(m, 0.5, 5.0, 0.01, 42), b = simulate_pd(m, 0.5, 5.0, 0.01, 42);
    EXPECT_EQ(a.record_hash, b.record_hash);
    EXPECT_EQ(a.tr_tau, b.tr_tau);
}

TEST(Photodetection, MeanJumpCountMatchesMasterEquation) {
    const auto m = build_rabi_model(1.0, 1.0);
    const double t = 10.0, dt = 1e-3;
    const auto ens = run_ensemble(m, 0.1, t, dt, Detection::pd, 10000, 3);
    std::vector<double> jumps;
    for (const auto& r : ens.records) jumps.push_back(static_cast<double>(r.jumps));
    const Eigen::MatrixXcd j = m.coupling(0.1);
    const double expected = integrated_expectation(m, 0.1, t, 1e-3, j.adjoint() * j);
    EXPECT_NEAR(mean(jumps), expected, 3.0 * stderr_of(jumps));
}

TEST(Photodetection, ThetaIndependentModelHasNoInformation) {
    auto m = build_rabi_model(1.0, 0.5);
    m.hamiltonian = [](double, double) -> Eigen::MatrixXcd { return 0.5 * (sigma_plus() + sigma_minus()); };
    const auto ens = run_ensemble(m, 0.3, 3.0, 0.01, Detection::pd, 200, 5);
    EXPECT_LT(ens.cfi.cfi, 1e-12);
}

TEST(Homodyne, NoCouplingIsPureNoise) {
    const auto m = build_rabi_model(1.0, 0.0);
    const auto ens = run_ensemble(m, 0.3, 2.0, 0.01, Detection::hd, 500, 6);
    EXPECT_LT(ens.cfi.cfi, 1e-12);
    std::vector<double> y;
    for (const auto& r : ens.records) y.push_back(r.sum_dy);
    EXPECT_NEAR(mean(y), 0.0, 3.0 * stderr_of(y));
}

TEST(Homodyne, QuadraticVariationIsElapsedTime) {
    const auto m = build_rabi_model(1.0, 0.5);
    const double t = 5.0;
    TrajectoryOptions o;
    o.phi = std::numbers::pi / 2;
    const auto ens = run_ensemble(m, 0.5, t, 1e-3, Detection::hd, 2000, 7, 1, o);
    std::vector<double> q;
    for (const auto& r : ens.records) q.push_back(r.sum_dw2);
    EXPECT_NEAR(mean(q), t, 3.0 * stderr_of(q));
}

TEST(Homodyne, MeanCurrentMatchesMasterEquation) {
    const auto m = build_rabi_model(1.0, 1.0);
    const double t = 5.0, phi = std::numbers::pi / 2;
    TrajectoryOptions o;
    o.phi = phi;
    const auto ens = run_ensemble(m, 0.5, t, 1e-3, Detection::hd, 2000, 8, 1, o);
    std::vector<double> y;
    for (const auto& r : ens.records) y.push_back(r.sum_dy);
    const Eigen::MatrixXcd j = m.coupling(0.5);
    const cplx e = std::polar(1.0, phi);
    const Eigen::MatrixXcd x = e * j + std::conj(e) * j.adjoint();
    EXPECT_NEAR(mean(y), integrated_expectation(m, 0.5, t, 1e-3, x), 3.0 * stderr_of(y));
}

TEST(Ensemble, DeterministicAcrossThreads) {
    const auto m = build_rabi_model(1.0, 0.5);
    const auto a = run_ensemble(m, 0.4, 2.0, 0.01, Detection::hd, 64, 9, 1);
    const auto b = run_ensemble(m, 0.4, 2.0, 0.01, Detection::hd, 64, 9, 4);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].record_hash, b.records[i].record_hash);
    EXPECT_EQ(a.cfi.cfi, b.cfi.cfi);
}

TEST(Ensemble, CheckpointMeanTracksMasterEquation) {
    const auto m = build_rabi_model(1.0, 0.5);
    TrajectoryOptions o;
    o.checkpoint_times = {1.0, 2.0};
    const auto ens = run_ensemble(m, 0.5, 2.0, 1e-3, Detection::pd, 2000, 10, 1, o);
    const auto me = solve_master_equation(m, 0.5, 2.0, 1e-3);
    ASSERT_EQ(ens.mean_state.size(), 2u);
    const Eigen::MatrixXcd ref = me.final();
    const Eigen::MatrixXcd diff = ens.mean_state[1] - ref;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            EXPECT_LE(std::abs(diff(i, j).real()), 3.0 * ens.stderr_real[1](i, j) + 1e-12);
            EXPECT_LE(std::abs(diff(i, j).imag()), 3.0 * ens.stderr_imag[1](i, j) + 1e-12);
        }
}

TEST(Ensemble, RejectsBadCheckpoint) {
    TrajectoryOptions o;
    o.checkpoint_times = {0.0105};
    EXPECT_THROW(run_ensemble(build_rabi_model(1.0, 0.5), 0.4, 1.0, 0.01, Detection::pd, 4, 1, 1, o),
                 ConfigurationError);
}

TEST(EstimateCfi, RequiresTwoMatchingRecords) {
    const auto m = build_rabi_model(1.0, 0.5);
    const auto a = simulate_pd(m, 0.4, 1.0, 0.01, 1);
    EXPECT_THROW(estimate_cfi({a}), ConfigurationError);
    const auto b = simulate_pd(m, 0.5, 1.0, 0.01, 2);
    EXPECT_THROW(estimate_cfi({a, b}), ConfigurationError);
}
