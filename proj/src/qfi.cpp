#include "lightmpo/qfi.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "lightmpo/seeding.hpp"

namespace lightmpo {

namespace {

DenseTensor<cplx> ones(DenseTensor<cplx>::Shape shape) {
    DenseTensor<cplx> t(std::move(shape));
    t.entries().setOnes();
    return t;
}

DenseTensor<cplx> left_linear(const DenseTensor<cplx>& env, const DenseTensor<cplx>& d, const DenseTensor<cplx>& x) {
    return contract("la,lstr,atsb->rb", env, d, x);
}
DenseTensor<cplx> right_linear(const DenseTensor<cplx>& env, const DenseTensor<cplx>& d, const DenseTensor<cplx>& x) {
    return contract("lstr,atsb,rb->la", d, x, env);
}
DenseTensor<cplx> left_quadratic(const DenseTensor<cplx>& env, const DenseTensor<cplx>& r,
                                 const DenseTensor<cplx>& x) {
    return contract("lac,lstr,atub,cusd->rbd", env, r, x, x);
}
DenseTensor<cplx> right_quadratic(const DenseTensor<cplx>& env, const DenseTensor<cplx>& r,
                                  const DenseTensor<cplx>& x) {
    return contract("lstr,atub,cusd,rbd->lac", r, x, x, env);
}

void check_sizes(const OperatorMpo& a, const OperatorMpo& x) {
    if (a.size() != x.size())
        throw ConfigurationError(fmt::format("site counts differ: {} vs {}", a.size(), x.size()));
}

// Real coordinates of a Hermitian-gauge site [Dl, 2, 2, Dr]: four per (a, b),
// namely E00, E11, (E01 + E10)/sqrt2 and i(E01 - E10)/sqrt2.
struct HermitianBasis {
    Index dl = 1, dr = 1;
    std::vector<std::array<std::pair<Index, cplx>, 2>> cols;
    std::vector<int> nnz;

    HermitianBasis(Index dl_, Index dr_) : dl(dl_), dr(dr_) {
        const double h = std::sqrt(0.5);
        auto flat = [this](Index a, Index p, Index q, Index b) { return ((a * 2 + p) * 2 + q) * dr + b; };
        for (Index a = 0; a < dl; ++a)
            for (Index b = 0; b < dr; ++b) {
                cols.push_back({{{flat(a, 0, 0, b), 1.0}, {0, 0.0}}});
                nnz.push_back(1);
                cols.push_back({{{flat(a, 1, 1, b), 1.0}, {0, 0.0}}});
                nnz.push_back(1);
                cols.push_back({{{flat(a, 0, 1, b), h}, {flat(a, 1, 0, b), h}}});
                nnz.push_back(2);
                cols.push_back({{{flat(a, 0, 1, b), cplx(0.0, h)}, {flat(a, 1, 0, b), cplx(0.0, -h)}}});
                nnz.push_back(2);
            }
    }

    Index size() const { return static_cast<Index>(cols.size()); }

    Vec<cplx> expand(const Eigen::VectorXd& y) const {
        Vec<cplx> x = Vec<cplx>::Zero(4 * dl * dr);
        for (Index j = 0; j < size(); ++j)
            for (int k = 0; k < nnz[static_cast<std::size_t>(j)]; ++k) {
                const auto& [f, c] = cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
                x(f) += c * y(j);
            }
        return x;
    }

    Eigen::VectorXd project(const Vec<cplx>& x) const {
        Eigen::VectorXd y(size());
        for (Index j = 0; j < size(); ++j) {
            cplx acc = 0.0;
            for (int k = 0; k < nnz[static_cast<std::size_t>(j)]; ++k) {
                const auto& [f, c] = cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
                acc += std::conj(c) * x(f);
            }
            y(j) = acc.real();
        }
        return y;
    }

    // Re(P^T v)
    Eigen::VectorXd reduce_vector(const Vec<cplx>& v) const {
        Eigen::VectorXd out(size());
        for (Index j = 0; j < size(); ++j) {
            cplx acc = 0.0;
            for (int k = 0; k < nnz[static_cast<std::size_t>(j)]; ++k) {
                const auto& [f, c] = cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
                acc += c * v(f);
            }
            out(j) = acc.real();
        }
        return out;
    }

    // Re(P^T M P) for a bilinear form M
    Eigen::MatrixXd reduce_form(const Mat<cplx>& m) const {
        const Index n = size();
        Eigen::MatrixXd out(n, n);
        for (Index j = 0; j < n; ++j)
            for (Index k = 0; k < n; ++k) {
                cplx acc = 0.0;
                for (int u = 0; u < nnz[static_cast<std::size_t>(j)]; ++u)
                    for (int v = 0; v < nnz[static_cast<std::size_t>(k)]; ++v) {
                        const auto& [f, cf] = cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(u)];
                        const auto& [g, cg] = cols[static_cast<std::size_t>(k)][static_cast<std::size_t>(v)];
                        acc += cf * m(f, g) * cg;
                    }
                out(j, k) = acc.real();
            }
        return 0.5 * (out + out.transpose());
    }
};

// Isometric real coordinates of a Hermitian-gauge site as a (Dl*4) x Dr or
// Dl x (4*Dr) matrix; k indexes Re X00, Re X11, sqrt2 Re X01, sqrt2 Im X01.
double real_coord(const DenseTensor<cplx>& site, Index a, int k, Index b) {
    constexpr double r2 = 1.4142135623730951;
    switch (k) {
        case 0: return site({a, 0, 0, b}).real();
        case 1: return site({a, 1, 1, b}).real();
        case 2: return r2 * site({a, 0, 1, b}).real();
        default: return r2 * site({a, 0, 1, b}).imag();
    }
}

void set_real_coords(DenseTensor<cplx>& site, Index a, Index b, double y0, double y1, double y2, double y3) {
    const double h = std::sqrt(0.5);
    site({a, 0, 0, b}) = y0;
    site({a, 1, 1, b}) = y1;
    site({a, 0, 1, b}) = cplx(h * y2, h * y3);
    site({a, 1, 0, b}) = cplx(h * y2, -h * y3);
}

Eigen::MatrixXd left_matrix(const DenseTensor<cplx>& site) {
    const Index dl = site.extent(0), dr = site.extent(3);
    Eigen::MatrixXd m(4 * dl, dr);
    for (Index a = 0; a < dl; ++a)
        for (int k = 0; k < 4; ++k)
            for (Index b = 0; b < dr; ++b) m(4 * a + k, b) = real_coord(site, a, k, b);
    return m;
}

DenseTensor<cplx> from_left_matrix(const Eigen::MatrixXd& m) {
    const Index dl = m.rows() / 4, dr = m.cols();
    DenseTensor<cplx> site({dl, 2, 2, dr});
    for (Index a = 0; a < dl; ++a)
        for (Index b = 0; b < dr; ++b)
            set_real_coords(site, a, b, m(4 * a, b), m(4 * a + 1, b), m(4 * a + 2, b), m(4 * a + 3, b));
    return site;
}

Eigen::MatrixXd right_matrix(const DenseTensor<cplx>& site) {
    const Index dl = site.extent(0), dr = site.extent(3);
    Eigen::MatrixXd m(dl, 4 * dr);
    for (Index a = 0; a < dl; ++a)
        for (int k = 0; k < 4; ++k)
            for (Index b = 0; b < dr; ++b) m(a, 4 * b + k) = real_coord(site, a, k, b);
    return m;
}

DenseTensor<cplx> from_right_matrix(const Eigen::MatrixXd& m) {
    const Index dl = m.rows(), dr = m.cols() / 4;
    DenseTensor<cplx> site({dl, 2, 2, dr});
    for (Index a = 0; a < dl; ++a)
        for (Index b = 0; b < dr; ++b)
            set_real_coords(site, a, b, m(a, 4 * b), m(a, 4 * b + 1), m(a, 4 * b + 2), m(a, 4 * b + 3));
    return site;
}

// Real bond matrices keep the Hermitian gauge, so X is unchanged by these moves.
void absorb_left(DenseTensor<cplx>& site, const Eigen::MatrixXd& r) {
    // site(a, ...) <- sum_c r(a, c) site(c, ...)
    const Index rest = site.size() / site.extent(0);
    const Mat<cplx> m = site.as_matrix(1);
    DenseTensor<cplx>::Shape shape = site.shape();
    shape[0] = r.rows();
    const Mat<cplx> out = r.cast<cplx>() * m;
    site = DenseTensor<cplx>(shape, Eigen::Map<const Vec<cplx>>(Mat<cplx>(out.transpose()).data(), r.rows() * rest));
}

void absorb_right(DenseTensor<cplx>& site, const Eigen::MatrixXd& l) {
    // site(..., b) <- sum_c site(..., c) l(c, b)
    const Index rest = site.size() / site.extent(3);
    const Mat<cplx> m = site.as_matrix(3);
    DenseTensor<cplx>::Shape shape = site.shape();
    shape[3] = l.cols();
    const Mat<cplx> out = m * l.cast<cplx>();
    site = DenseTensor<cplx>(shape, Eigen::Map<const Vec<cplx>>(Mat<cplx>(out.transpose()).data(), rest * l.cols()));
}

// Orthonormal sites are scaled to the norm of the 2x2 identity.
constexpr double kSqrt2 = 1.4142135623730951;

// Makes site n right-orthonormal and pushes the remainder into site n - 1.
void shift_center_left(OperatorMpo& x, int n) {
    auto& site = x.sites[static_cast<std::size_t>(n)];
    const Eigen::MatrixXd m = right_matrix(site);
    const Index k = std::min(m.rows(), m.cols());
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m.transpose());
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m.cols(), k);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    site = from_right_matrix(kSqrt2 * q.transpose());
    absorb_right(x.sites[static_cast<std::size_t>(n) - 1], r.transpose() / kSqrt2);
}

// Scales env to unit max-norm; site `from` is divided by sqrt of the factor
// and site `to` multiplied, so X is unchanged.
void balance(DenseTensor<cplx>& env, OperatorMpo& x, int from, int to) {
    const double s = env.entries().cwiseAbs().maxCoeff();
    if (!(s > 0.0) || !std::isfinite(s)) return;
    env *= cplx(1.0 / s);
    x.sites[static_cast<std::size_t>(from)] *= cplx(1.0 / std::sqrt(s));
    x.sites[static_cast<std::size_t>(to)] *= cplx(std::sqrt(s));
}

// Makes site n left-orthonormal and pushes the remainder into site n + 1.
void shift_center_right(OperatorMpo& x, int n) {
    auto& site = x.sites[static_cast<std::size_t>(n)];
    const Eigen::MatrixXd m = left_matrix(site);
    const Index k = std::min(m.rows(), m.cols());
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), k);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    site = from_left_matrix(kSqrt2 * q);
    absorb_left(x.sites[static_cast<std::size_t>(n) + 1], r / kSqrt2);
}

// C_{(a,p,q,b),(c,p',q',d)} = delta_{q p'} H[a,p,b,c,q',d]
Mat<cplx> quadratic_form(const DenseTensor<cplx>& h, Index dl, Index dr) {
    const Index n = 4 * dl * dr;
    Mat<cplx> C = Mat<cplx>::Zero(n, n);
    auto flat = [dr](Index a, Index p, Index q, Index b) { return ((a * 2 + p) * 2 + q) * dr + b; };
    for (Index a = 0; a < dl; ++a)
        for (Index p = 0; p < 2; ++p)
            for (Index b = 0; b < dr; ++b)
                for (Index c = 0; c < dl; ++c)
                    for (Index q2 = 0; q2 < 2; ++q2)
                        for (Index d = 0; d < dr; ++d) {
                            const cplx v = h({a, p, b, c, q2, d});
                            for (Index q = 0; q < 2; ++q) C(flat(a, p, q, b), flat(c, q, q2, d)) = v;
                        }
    return C;
}

struct Sweeper {
    const OperatorMpo& rho;
    const OperatorMpo& drho;
    const QfiOptions& opts;
    long rank_deficient = 0;
    long rejected = 0;

    // Sweeps left to right once, returning F after the last local update.
    double sweep(OperatorMpo& x) {
        const int n_sites = x.size();
        std::vector<DenseTensor<cplx>> r1(static_cast<std::size_t>(n_sites) + 1), r2(r1.size());
        r1.back() = ones({1, 1});
        r2.back() = ones({1, 1, 1});
        for (int n = n_sites - 1; n >= 1; --n) {
            const auto k = static_cast<std::size_t>(n);
            shift_center_left(x, n);
            r2[k] = right_quadratic(r2[k + 1], rho.sites[k], x.sites[k]);
            balance(r2[k], x, n, n - 1);
            r1[k] = right_linear(r1[k + 1], drho.sites[k], x.sites[k]);
        }
        DenseTensor<cplx> l1 = ones({1, 1}), l2 = ones({1, 1, 1});
        double f = 0.0;
        for (int n = 0; n < n_sites; ++n) {
            const auto k = static_cast<std::size_t>(n);
            auto& site = x.sites[k];
            const Index dl = site.extent(0), dr = site.extent(3);
            const auto bvec = contract("la,lqpr,rb->apqb", l1, drho.sites[k], r1[k + 1]);
            const auto h = contract("lac,lyxr,rbd->axbcyd", l2, rho.sites[k], r2[k + 1]);
            const HermitianBasis basis(dl, dr);
            const Eigen::MatrixXd G = basis.reduce_form(quadratic_form(h, dl, dr));
            const Eigen::VectorXd beta = basis.reduce_vector(bvec.entries());

            const Eigen::VectorXd y_old = basis.project(site.entries());
            const double f_old = 2.0 * beta.dot(y_old) - y_old.dot(G * y_old);
            const auto sol = min_norm_lstsq_selfadjoint<double>(G, beta, opts.rank_tol);
            if (sol.rank_deficient) ++rank_deficient;
            const double f_new = 2.0 * beta.dot(sol.x) - sol.x.dot(G * sol.x);
            if (std::isfinite(f_new) && f_new >= f_old) {
                site = hermitize(DenseTensor<cplx>(site.shape(), basis.expand(sol.x)));
                f = f_new;
            } else {
                ++rejected;
                f = f_old;
            }
            if (n + 1 < n_sites) {
                shift_center_right(x, n);
                l2 = left_quadratic(l2, rho.sites[k], site);
                balance(l2, x, n, n + 1);
            }
            l1 = left_linear(l1, drho.sites[k], site);
        }
        return f;
    }
};

// Rescales sites left to right so that the left environments of Tr[rho X^2]
// stay of order one, then applies the optimal global factor Tr[drho X]/Tr[rho X^2].
void normalize(const OperatorMpo& rho, const OperatorMpo& drho, OperatorMpo& x) {
    DenseTensor<cplx> env = ones({1, 1, 1});
    for (int n = 0; n < x.size(); ++n) {
        const auto k = static_cast<std::size_t>(n);
        auto next = left_quadratic(env, rho.sites[k], x.sites[k]);
        const double scale = next.entries().cwiseAbs().maxCoeff();
        if (scale > 0.0 && std::isfinite(scale)) {
            x.sites[k] *= cplx(1.0 / std::sqrt(scale));
            next *= cplx(1.0 / scale);
        }
        env = std::move(next);
    }
    const double m = second_moment(rho, x);
    const double a = hs_product(drho, x).real();
    if (m > 0.0 && std::isfinite(a / m)) x.sites.front() *= cplx(a / m);
}

SldMpo grow(const SldMpo& x, int bond_dim, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
    SldMpo out;
    out.hermitian_gauge = true;
    const int n_sites = x.size();
    for (int n = 0; n < n_sites; ++n) {
        const auto& old = x.mpo.sites[static_cast<std::size_t>(n)];
        const Index dl = n == 0 ? 1 : bond_dim;
        const Index dr = n == n_sites - 1 ? 1 : bond_dim;
        const double rms = old.size() > 0 ? old.entries().norm() / std::sqrt(static_cast<double>(old.size())) : 1.0;
        const double noise = 1e-1 * (rms > 0.0 ? rms : 1.0);
        DenseTensor<cplx> site({dl, 2, 2, dr});
        for (Index a = 0; a < dl; ++a)
            for (Index s = 0; s < 2; ++s)
                for (Index t = 0; t < 2; ++t)
                    for (Index b = 0; b < dr; ++b) {
                        if (a < old.extent(0) && b < old.extent(3))
                            site({a, s, t, b}) = old({a, s, t, b});
                        else
                            site({a, s, t, b}) = noise * cplx(gauss(rng), gauss(rng));
                    }
        out.mpo.sites.push_back(hermitize(site));
    }
    return out;
}

double relative_change(double now, double before) {
    const double denom = std::abs(before);
    if (denom == 0.0) return now == before ? 0.0 : std::numeric_limits<double>::infinity();
    return (now - before) / denom;
}

}  // namespace

double second_moment(const OperatorMpo& rho, const OperatorMpo& x) {
    check_sizes(rho, x);
    DenseTensor<cplx> env = ones({1, 1, 1});
    for (int n = 0; n < x.size(); ++n)
        env = left_quadratic(env, rho.sites[static_cast<std::size_t>(n)], x.sites[static_cast<std::size_t>(n)]);
    return env.entries()(0).real();
}

double objective(const LightStateMPO& rho, const DerivMpo& drho, const SldMpo& x) {
    check_sizes(rho.mpo, x.mpo);
    check_sizes(drho.mpo, x.mpo);
    return 2.0 * hs_product(drho.mpo, x.mpo).real() - second_moment(rho.mpo, x.mpo);
}

LstsqResult<cplx> local_solve(const Vec<cplx>& b, const Mat<cplx>& C, double rank_tol) {
    if (C.rows() != C.cols() || C.rows() != b.size())
        throw ContractionError(fmt::format("local system is {}x{} with right-hand side of length {}", C.rows(),
                                           C.cols(), b.size()));
    const Mat<cplx> sym = 0.5 * (C + C.transpose());
    return min_norm_lstsq<cplx>(sym, b, rank_tol);
}

DenseTensor<cplx> hermitize(const DenseTensor<cplx>& site) {
    if (site.rank() != 4 || site.extent(1) != site.extent(2))
        throw RankError("hermitize expects a site tensor [l, s, t, r] with square physical indices");
    DenseTensor<cplx> out(site.shape());
    for (Index l = 0; l < site.extent(0); ++l)
        for (Index s = 0; s < site.extent(1); ++s)
            for (Index t = 0; t < site.extent(2); ++t)
                for (Index r = 0; r < site.extent(3); ++r)
                    out({l, s, t, r}) = 0.5 * (site({l, s, t, r}) + std::conj(site({l, t, s, r})));
    return out;
}

SldMpo random_sld(int sites, int bond_dim, std::uint64_t seed) {
    if (sites < 1 || bond_dim < 1)
        throw ConfigurationError(fmt::format("need at least one site and D_X >= 1, got {} and {}", sites, bond_dim));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 / (4.0 * bond_dim)));
    SldMpo x;
    for (int n = 0; n < sites; ++n) {
        const Index dl = n == 0 ? 1 : bond_dim;
        const Index dr = n == sites - 1 ? 1 : bond_dim;
        DenseTensor<cplx> site({dl, 2, 2, dr});
        for (auto& z : site.entries()) z = cplx(gauss(rng), gauss(rng));
        x.mpo.sites.push_back(hermitize(site));
    }
    return x;
}

RestartOutcome optimize_sld(const LightStateMPO& rho, const DerivMpo& drho, SldMpo start, const QfiOptions& opts,
                            std::uint64_t seed, int restart_index) {
    check_sizes(rho.mpo, start.mpo);
    check_sizes(drho.mpo, start.mpo);
    if (opts.dx_max < 1) throw ConfigurationError("D_X_max must be at least 1");
    if (opts.max_sweeps < 1) throw ConfigurationError("sweep cap must be at least 1");

    std::mt19937_64 rng(seed);
    Sweeper sweeper{rho.mpo, drho.mpo, opts};
    RestartOutcome out;
    SldMpo x = std::move(start);
    normalize(rho.mpo, drho.mpo, x.mpo);

    const int first_dim = static_cast<int>(x.bond_dim());
    for (int dim = first_dim; dim <= std::max(first_dim, opts.dx_max); ++dim) {
        if (dim > x.bond_dim()) {
            x = grow(x, dim, rng);
            if (x.bond_dim() < dim) break;  // chain too short for a larger bond
        }
        BondStep step;
        step.bond_dim = dim;
        double f_prev = objective(rho, drho, x);
        for (int k = 1; k <= opts.max_sweeps; ++k) {
            const double f = sweeper.sweep(x.mpo);
            step.sweeps = k;
            step.objective = f;
            if (opts.record_trace) out.trace.push_back({restart_index, dim, k, f});
            if (relative_change(f, f_prev) < opts.eps_tol || f == f_prev) {
                step.converged = true;
                break;
            }
            f_prev = f;
        }
        if (!step.converged) out.converged = false;
        out.steps.push_back(step);
        if (out.steps.size() >= 2) {
            const double before = out.steps[out.steps.size() - 2].objective;
            if (relative_change(step.objective, before) < opts.eps_tol_bonddim || step.objective == before) break;
        }
    }
    out.value = std::max_element(out.steps.begin(), out.steps.end(), [](const BondStep& a, const BondStep& b) {
                    return a.objective < b.objective;
                })->objective;
    out.rank_deficient_solves = sweeper.rank_deficient;
    out.rejected_updates = sweeper.rejected;
    out.sld = std::move(x);
    return out;
}

QfiResult compute_qfi(const LightStateMPO& rho, const DerivMpo& drho, const QfiOptions& opts) {
    check_sizes(rho.mpo, drho.mpo);
    if (opts.restarts < 1) throw ConfigurationError("restart count must be at least 1");
    const int n_sites = rho.bins();

    auto run = [&](int r) {
        const std::uint64_t s = derive_seed(opts.seed, static_cast<std::uint64_t>(r));
        return optimize_sld(rho, drho, random_sld(n_sites, 1, s), opts, derive_seed(s, 1), r);
    };

    std::vector<RestartOutcome> outcomes;
    outcomes.reserve(static_cast<std::size_t>(opts.restarts));
    const int workers = std::max(1, opts.threads);
    for (int begin = 0; begin < opts.restarts; begin += workers) {
        const int end = std::min(opts.restarts, begin + workers);
        if (workers == 1) {
            outcomes.push_back(run(begin));
            continue;
        }
        std::vector<std::future<RestartOutcome>> batch;
        for (int r = begin; r < end; ++r) batch.push_back(std::async(std::launch::async, run, r));
        for (auto& f : batch) outcomes.push_back(f.get());
    }

    QfiResult result;
    double mean = 0.0;
    for (std::size_t r = 0; r < outcomes.size(); ++r) {
        const auto& o = outcomes[r];
        result.restart_values.push_back(o.value);
        mean += o.value;
        result.converged = result.converged && o.converged;
        result.rank_deficient_solves += o.rank_deficient_solves;
        result.rejected_updates += o.rejected_updates;
        result.trace.insert(result.trace.end(), o.trace.begin(), o.trace.end());
        if (r == 0 || o.value > result.value) {
            result.value = o.value;
            result.best_restart = static_cast<int>(r);
        }
    }
    mean /= static_cast<double>(outcomes.size());
    if (outcomes.size() > 1) {
        double ss = 0.0;
        for (double v : result.restart_values) ss += (v - mean) * (v - mean);
        result.restart_spread = std::sqrt(ss / static_cast<double>(outcomes.size() - 1));
    }
    auto& best = outcomes[static_cast<std::size_t>(result.best_restart)];
    result.steps = best.steps;
    result.sld = std::move(best.sld);
    return result;
}

}  // namespace lightmpo
