#include "lightmpo/dense_oracle.hpp"

#include <fmt/format.h>
#include <unsupported/Eigen/KroneckerProduct>

#include "lightmpo/tensor.hpp"

namespace lightmpo {

namespace {

Eigen::MatrixXcd ket(Index dim, Index k) {
    Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(dim, 1);
    v(k, 0) = 1.0;
    return v;
}

}  // namespace

DenseState dense_light_state(const ParametricEmitterModel& model, double theta, int bins, double dt) {
    if (bins < 1 || bins > 12) throw ResourceError(fmt::format("dense light state limited to 1..12 bins, got {}", bins));
    const Index d = model.dim;
    // joint emitter (x) light, emitter index most significant, new bins appended last
    Eigen::MatrixXcd rho = model.initial_state * model.initial_state.adjoint();
    Index light_dim = 1;
    for (int n = 0; n < bins; ++n) {
        const auto kraus = kraus_set(model, theta, n * dt, dt);
        const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(light_dim, light_dim);
        const Eigen::MatrixXcd zero = Eigen::MatrixXcd::Zero(d, d);
        // environment outcome e: (light 0 operator, light 1 operator)
        std::vector<std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd>> branches;
        branches.emplace_back(kraus.no_event(), kraus.light());
        for (int k = 0; k < kraus.channels(); ++k) branches.emplace_back(kraus.env(k), zero);

        Eigen::MatrixXcd next = Eigen::MatrixXcd::Zero(d * light_dim * 2, d * light_dim * 2);
        for (const auto& [a0, a1] : branches) {
            const Eigen::MatrixXcd K = Eigen::kroneckerProduct(a0, Eigen::kroneckerProduct(I, ket(2, 0))).eval() +
                                       Eigen::kroneckerProduct(a1, Eigen::kroneckerProduct(I, ket(2, 1))).eval();
            next += K * rho * K.adjoint();
        }
        rho = std::move(next);
        light_dim *= 2;
    }
    DenseState out;
    out.bins = bins;
    out.dt = dt;
    out.rho = Eigen::MatrixXcd::Zero(light_dim, light_dim);
    for (Index m = 0; m < d; ++m) out.rho += rho.block(m * light_dim, m * light_dim, light_dim, light_dim);
    return out;
}

Eigen::MatrixXcd dense_light_derivative(const ParametricEmitterModel& model, double theta, double delta, int bins,
                                        double dt) {
    return (dense_light_state(model, theta + delta, bins, dt).rho -
            dense_light_state(model, theta - delta, bins, dt).rho) /
           (2.0 * delta);
}

Eigen::MatrixXcd dense_light_env_state(const ParametricEmitterModel& model, double theta, int bins, double dt) {
    if (bins < 1 || bins > 6) throw ResourceError(fmt::format("dense light+environment state limited to 1..6 bins, got {}", bins));
    const Index d = model.dim;
    const Index local = model.channels + 2;
    // global pure state as a d x (local^n) matrix: psi(m, bins)
    Eigen::MatrixXcd psi = model.initial_state;
    for (int n = 0; n < bins; ++n) {
        const auto kraus = kraus_set(model, theta, n * dt, dt);
        Eigen::MatrixXcd next(d, psi.cols() * local);
        for (Index col = 0; col < psi.cols(); ++col)
            for (Index k = 0; k < local; ++k) next.col(col * local + k) = kraus.ops[static_cast<std::size_t>(k)].op * psi.col(col);
        psi = std::move(next);
    }
    // rho^LE = sum_m |psi_m><psi_m| with psi_m the m-th row
    return psi.transpose() * psi.conjugate();
}

ExactQfi exact_qfi(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& drho, double tol) {
    const Eigen::MatrixXcd h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h);
    if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition of rho failed");
    const Eigen::VectorXd& lam = eig.eigenvalues();
    const Eigen::MatrixXcd& V = eig.eigenvectors();
    const Eigen::MatrixXcd d = V.adjoint() * drho * V;

    ExactQfi out;
    Eigen::MatrixXcd sld_eig = Eigen::MatrixXcd::Zero(d.rows(), d.cols());
    for (Index i = 0; i < lam.size(); ++i)
        for (Index j = 0; j < lam.size(); ++j) {
            const double s = lam(i) + lam(j);
            if (s > tol) {
                out.value += 2.0 * std::norm(d(i, j)) / s;
                sld_eig(i, j) = 2.0 * d(i, j) / s;
            }
        }
    out.sld = V * sld_eig * V.adjoint();
    return out;
}

Eigen::MatrixXcd psd_sqrt(const Eigen::MatrixXcd& rho) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(0.5 * (rho + rho.adjoint()));
    if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().adjoint();
}

double exact_fidelity(const Eigen::MatrixXcd& rho1, const Eigen::MatrixXcd& rho2) {
    return trace_norm<cplx>(psd_sqrt(rho1) * psd_sqrt(rho2));
}

}  // namespace lightmpo
