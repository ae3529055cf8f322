#include <random>

#include <gtest/gtest.h>

#include "lightmpo/dense_oracle.hpp"
#include "lightmpo/qfi.hpp"

using namespace lightmpo;

namespace {

const double kOmega = 0.1;
const double kDt = 0.05;

struct Problem {
    LightStateMPO rho;
    DerivMpo drho;
    Eigen::MatrixXcd rho_dense;
    Eigen::MatrixXcd drho_dense;
};

Problem problem(int bins, double eta) {
    const auto m = build_rabi_model(1.0, eta);
    const double delta = default_fd_step(kOmega);
    return {build_light_mpo(m, kOmega, bins * kDt, kDt), build_deriv_mpo(m, kOmega, delta, bins * kDt, kDt),
            dense_light_state(m, kOmega, bins, kDt).rho, dense_light_derivative(m, kOmega, delta, bins, kDt)};
}

Mat<cplx> random_matrix(Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Mat<cplx> m(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) m(i, j) = cplx(g(rng), g(rng));
    return m;
}

}  // namespace

TEST(Objective, ZeroOperatorGivesZero) {
    const auto p = problem(4, 0.5);
    SldMpo x = random_sld(4, 2, 1);
    for (auto& s : x.mpo.sites) s.entries().setZero();
    EXPECT_EQ(objective(p.rho, p.drho, x), 0.0);
}

TEST(Objective, NoDerivativeIsNonPositive) {
    auto p = problem(4, 0.5);
    for (auto& s : p.drho.mpo.sites) s.entries().setZero();
    const SldMpo x = random_sld(4, 3, 2);
    const double f = objective(p.rho, p.drho, x);
    EXPECT_LE(f, 0.0);
    EXPECT_NEAR(f, -second_moment(p.rho.mpo, x.mpo), 1e-15);
}

TEST(Objective, MatchesDenseEvaluation) {
    const auto p = problem(4, 0.5);
    const SldMpo x = random_sld(4, 3, 3);
    const Eigen::MatrixXcd xd = to_dense(x.mpo);
    EXPECT_LT((xd - xd.adjoint()).cwiseAbs().maxCoeff(), 1e-14);
    const double ref = 2.0 * (p.drho_dense * xd).trace().real() - (p.rho_dense * xd * xd).trace().real();
    EXPECT_NEAR(objective(p.rho, p.drho, x), ref, 1e-10 * std::max(1.0, std::abs(ref)));
}

TEST(Objective, MismatchedSizesThrow) {
    const auto p = problem(4, 0.5);
    EXPECT_THROW(objective(p.rho, p.drho, random_sld(5, 1, 0)), ConfigurationError);
}

TEST(LocalSolve, IdentityReturnsRightHandSide) {
    const Vec<cplx> b = random_matrix(4, 5).col(0);
    const auto r = local_solve(b, Mat<cplx>::Identity(4, 4));
    EXPECT_LT((r.x - b).norm(), 1e-15);
}

TEST(LocalSolve, SingularSystem) {
    Mat<cplx> c = Mat<cplx>::Zero(2, 2);
    c(0, 0) = 1.0;
    Vec<cplx> b(2);
    b << 1.0, 0.0;
    auto r = local_solve(b, c);
    EXPECT_LT((r.x - b).norm(), 1e-15);
    b << 1.0, 1.0;
    r = local_solve(b, c);
    EXPECT_NEAR(std::abs(r.x(0) - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(r.x(1)), 0.0, 1e-15);
    EXPECT_TRUE(r.rank_deficient);
}

TEST(LocalSolve, StationaryPointDominates) {
    // F(x) = 2 Re(b^dag x) - x^dag C x is maximal at C x = b for PSD C
    const Mat<cplx> a = random_matrix(6, 7).real().cast<cplx>();
    const Mat<cplx> c = a * a.adjoint();
    const Vec<cplx> b = random_matrix(6, 8).col(0);
    auto f = [&](const Vec<cplx>& x) { return 2.0 * b.dot(x).real() - x.dot(c * x).real(); };
    const auto r = local_solve(b, c);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Vec<cplx> prev = random_matrix(6, 20 + s).col(0);
        EXPECT_GE(f(r.x) + 1e-12, f(prev));
    }
}

TEST(LocalSolve, ShapeMismatchThrows) {
    EXPECT_THROW(local_solve(Vec<cplx>::Ones(3), Mat<cplx>::Identity(2, 2)), ContractionError);
}

TEST(Hermitize, Idempotent) {
    DenseTensor<cplx> t({2, 2, 2, 3});
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (auto& z : t.entries()) z = cplx(g(rng), g(rng));
    const auto once = hermitize(t);
    EXPECT_LT((hermitize(once).entries() - once.entries()).norm(), 1e-15);
}

TEST(Hermitize, AntiHermitianVanishes) {
    DenseTensor<cplx> t({1, 2, 2, 1});
    t({0, 0, 1, 0}) = cplx(1.0, 2.0);
    t({0, 1, 0, 0}) = -cplx(1.0, -2.0);
    t({0, 0, 0, 0}) = cplx(0.0, 3.0);
    EXPECT_LT(hermitize(t).entries().norm(), 1e-15);
}

TEST(Hermitize, RejectsWrongRank) {
    EXPECT_THROW(hermitize(DenseTensor<cplx>({2, 2})), RankError);
}

TEST(RandomSld, HermitianAndSeeded) {
    const auto a = random_sld(5, 3, 9), b = random_sld(5, 3, 9);
    for (int n = 0; n < 5; ++n) EXPECT_EQ(a.mpo.sites[n].entries(), b.mpo.sites[n].entries());
    const Eigen::MatrixXcd d = to_dense(a.mpo);
    EXPECT_LT((d - d.adjoint()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(a.bond_dim(), 3);
}

TEST(ComputeQfi, ZeroDerivativeGivesZero) {
    auto p = problem(4, 0.5);
    for (auto& s : p.drho.mpo.sites) s.entries().setZero();
    QfiOptions o;
    o.restarts = 2;
    EXPECT_NEAR(compute_qfi(p.rho, p.drho, o).value, 0.0, 1e-14);
}

class SmallChainQfi : public ::testing::TestWithParam<std::tuple<int, double>> {};

TEST_P(SmallChainQfi, MatchesExactWithinOnePercent) {
    const auto [n, eta] = GetParam();
    const auto p = problem(n, eta);
    const double exact = exact_qfi(p.rho_dense, p.drho_dense).value;
    QfiOptions o;
    o.restarts = 20;
    o.seed = 5;
    const auto q = compute_qfi(p.rho, p.drho, o);
    EXPECT_NEAR(q.value, exact, 1e-2 * exact) << "N=" << n << " eta=" << eta;
    // each restart is a variational lower bound (up to round-off)
    for (double v : q.restart_values) EXPECT_LE(v, exact * (1.0 + 1e-8));
    EXPECT_EQ(static_cast<int>(q.restart_values.size()), 20);
    EXPECT_NEAR(objective(p.rho, p.drho, q.sld), q.value, 1e-2 * q.value);
}

INSTANTIATE_TEST_SUITE_P(Rabi, SmallChainQfi,
                         ::testing::Combine(::testing::Values(2, 4, 6, 8), ::testing::Values(0.5, 1.0)));

TEST(ComputeQfi, DeterministicAcrossThreads) {
    const auto p = problem(6, 0.5);
    QfiOptions o;
    o.restarts = 4;
    o.seed = 17;
    const auto a = compute_qfi(p.rho, p.drho, o);
    o.threads = 3;
    const auto b = compute_qfi(p.rho, p.drho, o);
    EXPECT_EQ(a.restart_values, b.restart_values);
    EXPECT_EQ(a.value, b.value);
}

TEST(ComputeQfi, BondRampIsRecorded) {
    const auto p = problem(6, 0.5);
    QfiOptions o;
    o.record_trace = true;
    const auto q = compute_qfi(p.rho, p.drho, o);
    ASSERT_FALSE(q.steps.empty());
    EXPECT_EQ(q.steps.front().bond_dim, 1);
    for (std::size_t k = 1; k < q.steps.size(); ++k) EXPECT_EQ(q.steps[k].bond_dim, q.steps[k - 1].bond_dim + 1);
    EXPECT_LE(q.steps.back().bond_dim, o.dx_max);
    EXPECT_FALSE(q.trace.empty());
}
