// mpo.hpp: the detected light as a locally purified MPO over time bins,
// its finite-difference derivative, and ladder contractions on MPOs.

#pragma once

#include <filesystem>
#include <stdexcept>
#include <vector>

#include "lightmpo/emitter.hpp"
#include "lightmpo/tensor.hpp"

namespace lightmpo {

struct ConfigurationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operator on a chain of two-level sites. Site n is a tensor [l, s, t, r]:
/// left bond, ket index s, bra index t, right bond. Boundary bonds have
/// extent 1, so the operator element is the plain product over sites.
struct OperatorMpo {
    std::vector<DenseTensor<cplx>> sites;

    int size() const { return static_cast<int>(sites.size()); }
    Index bond(int n) const;  // extent of the bond right of site n (0-based)
    Index max_bond() const;
};

/// rho^L(t_fin): bond extent D^2 at internal bonds. The emitter initial
/// state sits inside site 1 and the emitter trace <<1| inside site N.
struct LightStateMPO {
    OperatorMpo mpo;
    double dt = 0.0;
    double theta = 0.0;

    int bins() const { return mpo.size(); }
};

/// d rho / d theta as the direct sum of rho(theta + delta) and rho(theta - delta),
/// each site scaled by (2 delta)^(-1/N); bond extent 2 D^2.
struct DerivMpo {
    OperatorMpo mpo;
    double dt = 0.0;
    double theta = 0.0;
    double delta = 0.0;
    double site_prefactor = 1.0;
};

/// Number of bins t_fin / dt; throws ConfigurationError unless integral.
int bin_count(double t_fin, double dt);

/// Per-bin superoperators A^{s,t} = sum_E A^{s,E} (x) conj(A^{t,E}) acting on
/// row-major vectorized emitter operators; returns tensor [l, s, t, r] with
/// l = r = D^2.
DenseTensor<cplx> bin_superoperator(const BinKrausSet& kraus);

LightStateMPO build_light_mpo(const ParametricEmitterModel& model, double theta, double t_fin, double dt);

/// Finite-difference step used when none is given: 1e-3 |theta|, or 1e-3 at theta = 0.
double default_fd_step(double theta);

DerivMpo build_deriv_mpo(const ParametricEmitterModel& model, double theta, double delta, double t_fin,
                         double dt);

/// Full contraction with s = t summed at every site. Throws IntegrityError
/// when the imaginary part exceeds 1e-10.
double mpo_trace(const OperatorMpo& a);
inline double mpo_trace(const LightStateMPO& s) { return mpo_trace(s.mpo); }

/// Tr[a b] by the two-layer ladder contraction (complex in general).
cplx hs_product(const OperatorMpo& a, const OperatorMpo& b);

/// Tr[rho_a rho_b] for Hermitian operands; purity when a == b.
double hs_inner(const LightStateMPO& a, const LightStateMPO& b);

/// Dense 2^N x 2^N matrix; site 1 is the most significant bit. Guarded to N <= 12.
Eigen::MatrixXcd to_dense(const OperatorMpo& a);

/// Binary dump of site tensors; see docs/site_tensor_format.md.
void write_site_tensors(const std::filesystem::path& path, const OperatorMpo& a);
OperatorMpo read_site_tensors(const std::filesystem::path& path);

}  // namespace lightmpo
