#include "lightmpo/mpo.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <fmt/format.h>
#include <unsupported/Eigen/KroneckerProduct>

namespace lightmpo {

Index OperatorMpo::bond(int n) const { return sites.at(static_cast<std::size_t>(n)).extent(3); }

Index OperatorMpo::max_bond() const {
    Index b = 1;
    for (const auto& s : sites) b = std::max({b, s.extent(0), s.extent(3)});
    return b;
}

int bin_count(double t_fin, double dt) {
    if (!(dt > 0.0)) throw ConfigurationError(fmt::format("bin width must be positive, got {}", dt));
    if (!(t_fin > 0.0)) throw ConfigurationError(fmt::format("final time must be positive, got {}", t_fin));
    const double ratio = t_fin / dt;
    const long n = std::lround(ratio);
    if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio))
        throw ConfigurationError(fmt::format("t_fin / dt = {} / {} = {} is not a positive integer", t_fin, dt, ratio));
    return static_cast<int>(n);
}

DenseTensor<cplx> bin_superoperator(const BinKrausSet& kraus) {
    const Index d = kraus.no_event().rows();
    const Index d2 = d * d;
    const Eigen::MatrixXcd& A0 = kraus.no_event();
    const Eigen::MatrixXcd& J = kraus.light();

    std::array<Eigen::MatrixXcd, 4> blocks;
    blocks[0] = Eigen::kroneckerProduct(A0, A0.conjugate());
    for (int k = 0; k < kraus.channels(); ++k)
        blocks[0] += Eigen::kroneckerProduct(kraus.env(k), kraus.env(k).conjugate());
    blocks[1] = Eigen::kroneckerProduct(A0, J.conjugate());
    blocks[2] = Eigen::kroneckerProduct(J, A0.conjugate());
    blocks[3] = Eigen::kroneckerProduct(J, J.conjugate());

    DenseTensor<cplx> site({d2, 2, 2, d2});
    for (Index s = 0; s < 2; ++s)
        for (Index t = 0; t < 2; ++t)
            for (Index l = 0; l < d2; ++l)
                for (Index r = 0; r < d2; ++r) site({l, s, t, r}) = blocks[static_cast<std::size_t>(2 * s + t)](r, l);
    return site;
}

namespace {

DenseTensor<cplx> vectorized_initial_state(const ParametricEmitterModel& model) {
    const Eigen::VectorXcd& psi = model.initial_state;
    const Index d = psi.size();
    DenseTensor<cplx> v({1, d * d});
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) v({0, i * d + j}) = psi(i) * std::conj(psi(j));
    return v;
}

DenseTensor<cplx> vectorized_identity(Index d) {
    DenseTensor<cplx> v({d * d, 1});
    for (Index i = 0; i < d; ++i) v({i * d + i, 0}) = 1.0;
    return v;
}

}  // namespace

LightStateMPO build_light_mpo(const ParametricEmitterModel& model, double theta, double t_fin, double dt) {
    const int n_bins = bin_count(t_fin, dt);
    if (std::abs(model.initial_state.norm() - 1.0) > 1e-12)
        throw DomainError("emitter initial state must be normalized");

    LightStateMPO out;
    out.dt = dt;
    out.theta = theta;
    out.mpo.sites.reserve(static_cast<std::size_t>(n_bins));
    const auto left = vectorized_initial_state(model);
    const auto right = vectorized_identity(model.dim);
    for (int n = 0; n < n_bins; ++n) {
        auto site = bin_superoperator(kraus_set(model, theta, n * dt, dt));
        if (n == 0) site = contract("al,lstr->astr", left, site);
        if (n == n_bins - 1) site = contract("lstr,rb->lstb", site, right);
        out.mpo.sites.push_back(std::move(site));
    }
    return out;
}

double default_fd_step(double theta) { return theta == 0.0 ? 1e-3 : 1e-3 * std::abs(theta); }

DerivMpo build_deriv_mpo(const ParametricEmitterModel& model, double theta, double delta, double t_fin,
                         double dt) {
    if (!(delta > 0.0)) throw ConfigurationError(fmt::format("finite-difference step must be positive, got {}", delta));
    const int n_bins = bin_count(t_fin, dt);
    const double prefactor = std::pow(2.0 * delta, -1.0 / n_bins);
    if (!std::isfinite(prefactor) || prefactor > 1e150)
        throw ConfigurationError(fmt::format(
            "per-site prefactor (2 delta)^(-1/N) = {} overflows for delta = {} and N = {}; use a larger delta", prefactor,
            delta, n_bins));

    const auto plus = build_light_mpo(model, theta + delta, t_fin, dt);
    const auto minus = build_light_mpo(model, theta - delta, t_fin, dt);

    DerivMpo out;
    out.dt = dt;
    out.theta = theta;
    out.delta = delta;
    out.site_prefactor = prefactor;
    for (int n = 0; n < n_bins; ++n) {
        const auto& p = plus.mpo.sites[static_cast<std::size_t>(n)];
        const auto& m = minus.mpo.sites[static_cast<std::size_t>(n)];
        const bool first = n == 0, last = n == n_bins - 1;
        const Index lp = p.extent(0), rp = p.extent(3);
        const Index lm = m.extent(0), rm = m.extent(3);
        const Index l_off = first ? 0 : lp;
        const Index r_off = last ? 0 : rp;
        DenseTensor<cplx> site({first ? 1 : lp + lm, 2, 2, last ? 1 : rp + rm});
        // the minus sign of the second branch is carried by site 1 only
        const cplx sign_m = first ? -1.0 : 1.0;
        for (Index s = 0; s < 2; ++s)
            for (Index t = 0; t < 2; ++t) {
                for (Index l = 0; l < lp; ++l)
                    for (Index r = 0; r < rp; ++r) site({l, s, t, r}) += prefactor * p({l, s, t, r});
                for (Index l = 0; l < lm; ++l)
                    for (Index r = 0; r < rm; ++r)
                        site({l_off + l, s, t, r_off + r}) += sign_m * prefactor * m({l, s, t, r});
            }
        out.mpo.sites.push_back(std::move(site));
    }
    return out;
}

double mpo_trace(const OperatorMpo& a) {
    DenseTensor<cplx> delta({2, 2});
    delta({0, 0}) = delta({1, 1}) = 1.0;
    DenseTensor<cplx> env({1});
    env({0}) = 1.0;
    for (const auto& site : a.sites) env = contract("l,lstr,st->r", env, site, delta);
    const cplx tr = env.entries()(0);
    if (std::abs(tr.imag()) > 1e-10 * std::max(1.0, std::abs(tr.real())))
        throw IntegrityError(fmt::format("MPO trace has imaginary part {}", tr.imag()));
    return tr.real();
}

cplx hs_product(const OperatorMpo& a, const OperatorMpo& b) {
    if (a.size() != b.size())
        throw ConfigurationError(fmt::format("site counts differ: {} vs {}", a.size(), b.size()));
    DenseTensor<cplx> env({1, 1});
    env({0, 0}) = 1.0;
    for (int n = 0; n < a.size(); ++n)
        env = contract("lm,lstr,mtsq->rq", env, a.sites[static_cast<std::size_t>(n)],
                       b.sites[static_cast<std::size_t>(n)]);
    return env.entries()(0);
}

double hs_inner(const LightStateMPO& a, const LightStateMPO& b) {
    const cplx v = hs_product(a.mpo, b.mpo);
    if (std::abs(v.imag()) > 1e-10 * std::max(1.0, std::abs(v.real())))
        throw IntegrityError(fmt::format("Hilbert-Schmidt product has imaginary part {}", v.imag()));
    return v.real();
}

Eigen::MatrixXcd to_dense(const OperatorMpo& a) {
    if (a.size() < 1 || a.size() > 12)
        throw ConfigurationError(fmt::format("dense reconstruction supports 1..12 sites, got {}", a.size()));
    // acc[S, T, r] with S, T the fused ket/bra indices of the sites so far
    DenseTensor<cplx> acc = a.sites.front().reshaped({2, 2, a.sites.front().extent(3)});
    for (int n = 1; n < a.size(); ++n) {
        const auto& site = a.sites[static_cast<std::size_t>(n)];
        auto next = contract("STl,lstr->SsTtr", acc, site);
        const Index dim = acc.extent(0) * 2;
        acc = next.reshaped({dim, dim, site.extent(3)});
    }
    return acc.reshaped({acc.extent(0), acc.extent(1)}).as_matrix(1);
}

namespace {

template <typename T>
void put_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
    unsigned char bytes[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw IntegrityError("truncated site-tensor file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

constexpr char kMagic[4] = {'L', 'M', 'P', 'O'};

}  // namespace

void write_site_tensors(const std::filesystem::path& path, const OperatorMpo& a) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
    os.write(kMagic, 4);
    put_le<std::uint32_t>(os, 1);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(a.size()));
    for (const auto& site : a.sites) {
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(site.rank()));
        for (Index e : site.shape()) put_le<std::uint64_t>(os, static_cast<std::uint64_t>(e));
        for (const cplx& z : site.entries()) {
            put_le<double>(os, z.real());
            put_le<double>(os, z.imag());
        }
    }
}

OperatorMpo read_site_tensors(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw IntegrityError("not a site-tensor file");
    if (get_le<std::uint32_t>(is) != 1) throw IntegrityError("unsupported site-tensor file version");
    const auto count = get_le<std::uint32_t>(is);
    OperatorMpo out;
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto rank = get_le<std::uint32_t>(is);
        DenseTensor<cplx>::Shape shape(rank);
        for (auto& e : shape) e = static_cast<Index>(get_le<std::uint64_t>(is));
        DenseTensor<cplx> site(shape);
        for (auto& z : site.entries()) {
            const double re = get_le<double>(is);
            const double im = get_le<double>(is);
            z = cplx(re, im);
        }
        out.sites.push_back(std::move(site));
    }
    return out;
}

}  // namespace lightmpo
