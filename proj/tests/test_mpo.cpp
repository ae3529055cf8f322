#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "lightmpo/dense_oracle.hpp"
#include "lightmpo/mpo.hpp"

using namespace lightmpo;

namespace {

const double kOmega = 0.1;
const double kDt = 0.05;

double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(BinCount, IntegralAndNot) {
    EXPECT_EQ(bin_count(10.0, 0.05), 200);
    EXPECT_EQ(bin_count(0.2, 0.05), 4);
    EXPECT_THROW(bin_count(1.0, 0.3), ConfigurationError);
    EXPECT_THROW(bin_count(1.0, 0.0), ConfigurationError);
    EXPECT_THROW(bin_count(-1.0, 0.1), ConfigurationError);
}

TEST(LightMpo, VacuumChainWithoutDrive) {
    const auto m = build_rabi_model(1.0, 0.5);
    const auto rho = build_light_mpo(m, 0.0, 4 * kDt, kDt);
    const Eigen::MatrixXcd d = to_dense(rho.mpo);
    Eigen::MatrixXcd vac = Eigen::MatrixXcd::Zero(16, 16);
    vac(0, 0) = 1.0;
    EXPECT_LT(max_abs(d - vac), 1e-15);
    EXPECT_EQ(mpo_trace(rho), 1.0);
    EXPECT_NEAR(hs_inner(rho, rho), 1.0, 1e-15);
}

TEST(LightMpo, BondExtentIsDSquared) {
    const auto rho = build_light_mpo(build_rabi_model(1.0, 0.5), kOmega, 6 * kDt, kDt);
    ASSERT_EQ(rho.bins(), 6);
    for (int n = 0; n < 5; ++n) EXPECT_EQ(rho.mpo.bond(n), 4);
    EXPECT_EQ(rho.mpo.bond(5), 1);
}

class Reconstruction : public ::testing::TestWithParam<std::tuple<int, double>> {};

TEST_P(Reconstruction, MatchesDenseKrausChain) {
    const auto [n, eta] = GetParam();
    const auto m = build_rabi_model(1.0, eta);
    const auto rho = build_light_mpo(m, kOmega, n * kDt, kDt);
    const auto dense = dense_light_state(m, kOmega, n, kDt);
    const Eigen::MatrixXcd d = to_dense(rho.mpo);
    EXPECT_LT(max_abs(d - dense.rho), 1e-12);
    EXPECT_LT(max_abs(d - d.adjoint()), 1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (d + d.adjoint()));
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-14);
    EXPECT_NEAR(mpo_trace(rho), dense.rho.trace().real(), 1e-13);
}

INSTANTIATE_TEST_SUITE_P(SmallChains, Reconstruction,
                         ::testing::Combine(::testing::Values(1, 2, 4, 6, 8), ::testing::Values(0.5, 1.0)));

TEST(LightMpo, PulsedMatchesDense) {
    PulseEnvelope p;
    p.duration = 0.1;
    p.center = 0.1;
    p.mean_photons = 2.0;
    const auto m = build_pulsed_model(0.5, p);
    const auto rho = build_light_mpo(m, 1.0, 6 * 0.04, 0.04);
    EXPECT_LT(max_abs(to_dense(rho.mpo) - dense_light_state(m, 1.0, 6, 0.04).rho), 1e-12);
}

TEST(LightMpo, TraceDefectBoundedByCompleteness) {
    const auto m = build_rabi_model(1.0, 0.5);
    const auto rho = build_light_mpo(m, kOmega, 10.0, kDt);
    double bound = 0.0;
    for (int k = 0; k < 200; ++k) bound += completeness_defect(kraus_set(m, kOmega, k * kDt, kDt));
    EXPECT_LE(std::abs(1.0 - mpo_trace(rho)), bound);
    EXPECT_LT(std::abs(1.0 - mpo_trace(rho)), 1e-2);
}

TEST(LightMpo, TraceIsLinear) {
    auto rho = build_light_mpo(build_rabi_model(1.0, 0.5), kOmega, 4 * kDt, kDt);
    const double t = mpo_trace(rho);
    rho.mpo.sites[2] *= cplx(2.0);
    EXPECT_NEAR(mpo_trace(rho), 2.0 * t, 1e-14);
}

TEST(HsInner, PureStatePurity) {
    const auto m = build_rabi_model(1.0, 1.0);
    const auto rho = build_light_mpo(m, kOmega, 40 * kDt, kDt);
    EXPECT_NEAR(hs_inner(rho, rho), 1.0, 1e-3);
}

TEST(HsInner, MatchesDenseOverlap) {
    const auto m = build_rabi_model(1.0, 0.5);
    const auto a = build_light_mpo(m, kOmega, 4 * kDt, kDt);
    const auto b = build_light_mpo(m, 0.3, 4 * kDt, kDt);
    const cplx ref = (dense_light_state(m, kOmega, 4, kDt).rho * dense_light_state(m, 0.3, 4, kDt).rho).trace();
    EXPECT_NEAR(hs_inner(a, b), ref.real(), 1e-10);
}

TEST(DerivMpo, MatchesDenseDifference) {
    for (double eta : {0.5, 1.0}) {
        const auto m = build_rabi_model(1.0, eta);
        const double delta = default_fd_step(kOmega);
        const auto d = build_deriv_mpo(m, kOmega, delta, 4 * kDt, kDt);
        EXPECT_LT(max_abs(to_dense(d.mpo) - dense_light_derivative(m, kOmega, delta, 4, kDt)), 1e-10);
        for (int n = 0; n < 3; ++n) EXPECT_EQ(d.mpo.bond(n), 8);
    }
}

TEST(DerivMpo, ThetaIndependentModelIsZero) {
    auto m = build_rabi_model(1.0, 0.5);
    m.hamiltonian = [](double, double) -> Eigen::MatrixXcd { return 0.3 * (sigma_plus() + sigma_minus()); };
    const auto d = build_deriv_mpo(m, 0.2, 1e-3, 4 * kDt, kDt);
    EXPECT_LT(max_abs(to_dense(d.mpo)), 1e-12);
    EXPECT_LT(std::abs(mpo_trace(d.mpo)), 1e-12);
}

TEST(DerivMpo, RejectsBadStep) {
    EXPECT_THROW(build_deriv_mpo(build_rabi_model(1.0, 0.5), kOmega, 0.0, 4 * kDt, kDt), ConfigurationError);
}

TEST(SiteTensors, RoundTrip) {
    const auto rho = build_light_mpo(build_rabi_model(1.0, 0.5), kOmega, 5 * kDt, kDt);
    const auto path = std::filesystem::temp_directory_path() / "lightmpo_sites_roundtrip.bin";
    write_site_tensors(path, rho.mpo);
    const auto back = read_site_tensors(path);
    ASSERT_EQ(back.size(), rho.mpo.size());
    for (int n = 0; n < back.size(); ++n) {
        EXPECT_EQ(back.sites[n].shape(), rho.mpo.sites[n].shape());
        EXPECT_EQ(back.sites[n].entries(), rho.mpo.sites[n].entries());
    }
    std::filesystem::remove(path);
}

TEST(SiteTensors, TruncatedFileIsRejected) {
    const auto rho = build_light_mpo(build_rabi_model(1.0, 0.5), kOmega, 3 * kDt, kDt);
    const auto path = std::filesystem::temp_directory_path() / "lightmpo_sites_truncated.bin";
    write_site_tensors(path, rho.mpo);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
    EXPECT_THROW(read_site_tensors(path), IntegrityError);
    std::filesystem::remove(path);
}
