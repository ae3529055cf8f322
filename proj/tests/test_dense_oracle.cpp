#include <random>

#include <gtest/gtest.h>

#include "lightmpo/dense_oracle.hpp"
#include "lightmpo/tensor.hpp"

using namespace lightmpo;

namespace {

Eigen::MatrixXcd random_density(int dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXcd a(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) a(i, j) = cplx(g(rng), g(rng));
    Eigen::MatrixXcd r = a * a.adjoint();
    return r / r.trace();
}

}  // namespace

TEST(DenseState, SingleBinWithoutDriveIsVacuum) {
    const auto s = dense_light_state(build_rabi_model(1.0, 0.5), 0.0, 1, 0.05);
    Eigen::MatrixXcd vac = Eigen::MatrixXcd::Zero(2, 2);
    vac(0, 0) = 1.0;
    EXPECT_LT((s.rho - vac).norm(), 1e-15);
}

TEST(DenseState, TraceDefectIsSecondOrder) {
    const auto m = build_rabi_model(1.0, 0.5);
    const double a = std::abs(1.0 - dense_light_state(m, 0.5, 4, 0.1).rho.trace().real());
    const double b = std::abs(1.0 - dense_light_state(m, 0.5, 8, 0.05).rho.trace().real());
    // same final time, half the bin width: N dt^2 halves
    EXPECT_NEAR(a / b, 2.0, 0.2);
}

TEST(DenseState, ResourceGuard) {
    EXPECT_THROW(dense_light_state(build_rabi_model(1.0, 0.5), 0.1, 13, 0.05), ResourceError);
    EXPECT_THROW(dense_light_env_state(build_rabi_model(1.0, 0.5), 0.1, 7, 0.05), ResourceError);
}

TEST(DenseState, LightEnvReducesToLight) {
    const auto m = build_rabi_model(1.0, 0.5);
    const int n = 3;
    const Eigen::MatrixXcd le = dense_light_env_state(m, 0.2, n, 0.05);
    // per bin: levels (vacuum, light photon, environment photon); tracing out
    // the environment keeps pairs that agree on the environment occupation
    const int local = 3, total = 27;
    Eigen::MatrixXcd light = Eigen::MatrixXcd::Zero(1 << n, 1 << n);
    for (int i = 0; i < total; ++i)
        for (int j = 0; j < total; ++j) {
            int li = 0, lj = 0, w = 1;
            bool keep = true;
            for (int k = 0, pi = i, pj = j; k < n; ++k, pi /= local, pj /= local, w <<= 1) {
                const int a = pi % local, b = pj % local;
                if ((a == 2) != (b == 2)) keep = false;
                li += (a == 1) * w;
                lj += (b == 1) * w;
            }
            if (keep) light(li, lj) += le(i, j);
        }
    EXPECT_LT((light - dense_light_state(m, 0.2, n, 0.05).rho).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ExactQfi, PureQubit) {
    const double th = 0.4;
    Eigen::VectorXcd psi(2), dpsi(2);
    psi << std::cos(th), std::sin(th);
    dpsi << -std::sin(th), std::cos(th);
    const Eigen::MatrixXcd rho = psi * psi.adjoint();
    const Eigen::MatrixXcd drho = dpsi * psi.adjoint() + psi * dpsi.adjoint();
    EXPECT_NEAR(exact_qfi(rho, drho).value, 4.0, 1e-12);
}

TEST(ExactQfi, Bernoulli) {
    const double th = 0.3;
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(2, 2), drho = Eigen::MatrixXcd::Zero(2, 2);
    rho(0, 0) = (1 + th) / 2;
    rho(1, 1) = (1 - th) / 2;
    drho(0, 0) = 0.5;
    drho(1, 1) = -0.5;
    EXPECT_NEAR(exact_qfi(rho, drho).value, 1.0 / (1.0 - th * th), 1e-12);
}

TEST(ExactQfi, SldSolvesLyapunov) {
    const Eigen::MatrixXcd rho = random_density(8, 11);
    Eigen::MatrixXcd h = random_density(8, 12) - random_density(8, 13);
    h = 0.5 * (h + h.adjoint());
    const auto q = exact_qfi(rho, h);
    const Eigen::MatrixXcd res = 0.5 * (q.sld * rho + rho * q.sld) - h;
    EXPECT_LT(res.cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(q.value, (rho * q.sld * q.sld).trace().real(), 1e-9 * q.value);
}

TEST(ExactFidelity, Examples) {
    const Eigen::MatrixXcd rho = random_density(4, 21);
    EXPECT_NEAR(exact_fidelity(rho, rho), 1.0, 1e-10);
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(2, 2), b = Eigen::MatrixXcd::Zero(2, 2);
    a(0, 0) = 1.0;
    b(1, 1) = 1.0;
    EXPECT_NEAR(exact_fidelity(a, b), 0.0, 1e-12);
}

TEST(ExactFidelity, BuresLimitGivesQfi) {
    auto family = [](double th) {
        Eigen::MatrixXcd r(2, 2);
        r << 0.5 + 0.3 * std::cos(th), 0.3 * std::sin(th) * cplx(0.0, 1.0), -0.3 * std::sin(th) * cplx(0.0, 1.0),
            0.5 - 0.3 * std::cos(th);
        return r;
    };
    const double th = 0.7, h = 1e-6;
    const double q = exact_qfi(family(th), (family(th + h) - family(th - h)) / (2 * h)).value;
    double prev_err = 0.0;
    for (double eps : {2e-2, 1e-2}) {
        const double f = exact_fidelity(family(th), family(th + eps));
        const double err = std::abs(8.0 * (1.0 - f) / (eps * eps) - q);
        if (prev_err > 0.0) {
            EXPECT_LT(err, 0.6 * prev_err);
        }
        prev_err = err;
    }
    EXPECT_LT(prev_err, 1e-2 * q);
}
