#include "lightmpo/trajectories.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "lightmpo/mpo.hpp"
#include "lightmpo/seeding.hpp"
#include "lightmpo/tensor.hpp"

namespace lightmpo {

std::string to_string(Detection d) { return d == Detection::pd ? "pd" : "hd"; }

Detection parse_detection(const std::string& s) {
    if (s == "pd") return Detection::pd;
    if (s == "hd") return Detection::hd;
    throw ConfigurationError(fmt::format("unknown detection method '{}' (expected pd or hd)", s));
}

namespace {

template <typename M>
struct StepOps {
    M A, dA;  // no-click (pd) or dy-independent part (hd)
    M B, dB;  // click operator (pd) or dy coefficient (hd)
    std::vector<M> L, dL;
    M innovation;  // e^{i phi} J + h.c., for dw
};

struct RawOps {
    Eigen::MatrixXcd A, B;
    std::vector<Eigen::MatrixXcd> L;
};

RawOps normalized_ops(const ParametricEmitterModel& model, double theta, double t, double dt, Detection method,
                      double phi) {
    const cplx i(0.0, 1.0);
    const Eigen::MatrixXcd H = model.hamiltonian(t, theta);
    const Eigen::MatrixXcd J = model.coupling(theta);
    const auto Ls = model.lindblads(theta);
    Eigen::MatrixXcd decay = J.adjoint() * J;
    for (const auto& l : Ls) decay += l.adjoint() * l;
    const auto I = Eigen::MatrixXcd::Identity(model.dim, model.dim);
    const Eigen::MatrixXcd A = I - i * dt * H - 0.5 * dt * decay;
    const Eigen::MatrixXcd S = A.adjoint() * A + dt * decay;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(0.5 * (S + S.adjoint()));
    const Eigen::MatrixXcd inv_sqrt = eig.operatorInverseSqrt();

    RawOps out;
    out.A = A * inv_sqrt;
    out.B = method == Detection::pd ? Eigen::MatrixXcd(std::sqrt(dt) * J * inv_sqrt)
                                    : Eigen::MatrixXcd(std::exp(i * phi) * J * inv_sqrt);
    for (const auto& l : Ls) out.L.push_back(std::sqrt(dt) * l * inv_sqrt);
    return out;
}

template <typename M>
StepOps<M> step_ops(const ParametricEmitterModel& model, double theta, double h, double t, double dt,
                    Detection method, double phi) {
    const auto c = normalized_ops(model, theta, t, dt, method, phi);
    const auto p = normalized_ops(model, theta + h, t, dt, method, phi);
    const auto m = normalized_ops(model, theta - h, t, dt, method, phi);
    StepOps<M> s;
    s.A = c.A;
    s.B = c.B;
    s.dA = (p.A - m.A) / (2.0 * h);
    s.dB = (p.B - m.B) / (2.0 * h);
    for (std::size_t k = 0; k < c.L.size(); ++k) {
        s.L.push_back(c.L[k]);
        s.dL.push_back((p.L[k] - m.L[k]) / (2.0 * h));
    }
    const Eigen::MatrixXcd J = std::exp(cplx(0.0, phi)) * model.coupling(theta);
    s.innovation = J + J.adjoint();
    return s;
}

template <typename M>
bool same_ops(const StepOps<M>& a, const StepOps<M>& b) {
    if (a.A != b.A || a.B != b.B || a.dA != b.dA || a.dB != b.dB) return false;
    for (std::size_t k = 0; k < a.L.size(); ++k)
        if (a.L[k] != b.L[k] || a.dL[k] != b.dL[k]) return false;
    return true;
}

struct Fnv1a {
    std::uint64_t h = 1469598103934665603ULL;
    template <typename T>
    void add(const T& v) {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &v, sizeof(T));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 1099511628211ULL;
        }
    }
};

template <typename M>
double re_trace(const M& m) {
    return m.trace().real();
}

// K r K^dag and its theta-derivative contribution K tau K^dag + dK r K^dag + K r dK^dag
template <typename M>
void accumulate(const M& K, const M& dK, const M& r, const M& tau, M& out, M& dout) {
    const M Kr = K * r;
    out.noalias() += Kr * K.adjoint();
    dout.noalias() += K * tau * K.adjoint();
    const M cross = dK * r * K.adjoint();
    dout += cross + cross.adjoint();
}

}  // namespace

struct TrajectoryKernel::Impl {
    Detection method = Detection::pd;
    double theta = 0.0, t_fin = 0.0, dt = 0.0, phi = 0.0;
    long steps = 0;
    int dim = 2;
    bool keep_record = false;
    Eigen::MatrixXcd rho0;
    std::vector<long> checkpoint_steps;
    std::vector<StepOps<Eigen::Matrix2cd>> ops2;
    std::vector<StepOps<Eigen::MatrixXcd>> opsx;

    template <typename M>
    TrajectoryRecord run(const std::vector<StepOps<M>>& ops, std::uint64_t seed) const;
};

template <typename M>
TrajectoryRecord TrajectoryKernel::Impl::run(const std::vector<StepOps<M>>& ops, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sdt = std::sqrt(dt);

    TrajectoryRecord rec;
    rec.seed = seed;
    rec.method = method;
    rec.t_fin = t_fin;
    rec.theta = theta;
    rec.phi = phi;
    rec.dt = dt;
    Fnv1a hash;

    M r = rho0;
    M tau = M::Zero(dim, dim);
    std::size_t next_cp = 0;
    auto checkpoint = [&](long k) {
        while (next_cp < checkpoint_steps.size() && checkpoint_steps[next_cp] == k) {
            rec.checkpoints.emplace_back(Eigen::MatrixXcd(r));
            ++next_cp;
        }
    };
    checkpoint(0);

    M out(dim, dim), dout(dim, dim);
    for (long k = 0; k < steps; ++k) {
        const auto& s = ops[ops.size() == 1 ? 0 : static_cast<std::size_t>(k)];
        out.setZero();
        dout.setZero();
        double norm = 0.0;
        if (method == Detection::pd) {
            const double p1 = re_trace(M(s.B * r * s.B.adjoint()));
            double p0 = re_trace(M(s.A * r * s.A.adjoint()));
            for (const auto& l : s.L) p0 += re_trace(M(l * r * l.adjoint()));
            if (std::abs(p0 + p1 - 1.0) > 1e-6)
                throw NumericError(fmt::format("outcome probabilities sum to {} at step {}", p0 + p1, k));
            if (uniform(rng) < p1) {
                accumulate(s.B, s.dB, r, tau, out, dout);
                ++rec.jumps;
                hash.add(k);
                if (keep_record) rec.jump_times.push_back(static_cast<double>(k + 1) * dt);
                norm = p1;
            } else {
                accumulate(s.A, s.dA, r, tau, out, dout);
                for (std::size_t j = 0; j < s.L.size(); ++j) accumulate(s.L[j], s.dL[j], r, tau, out, dout);
                norm = p0;
            }
        } else {
            double a = re_trace(M(s.A * r * s.A.adjoint()));
            for (const auto& l : s.L) a += re_trace(M(l * r * l.adjoint()));
            const double b = 2.0 * re_trace(M(s.B * r * s.A.adjoint()));
            const double c = re_trace(M(s.B * r * s.B.adjoint()));
            if (std::abs(a + c * dt - 1.0) > 1e-6)
                throw NumericError(fmt::format("homodyne outcome density integrates to {} at step {}", a + c * dt, k));
            const double bound = a + 0.5 * std::abs(b) * sdt + c * dt;
            double y = 0.0;
            for (;;) {
                if (uniform(rng) < 0.5) {
                    y = sdt * normal(rng);
                } else {
                    const double z1 = normal(rng), z2 = normal(rng), z3 = normal(rng);
                    y = (uniform(rng) < 0.5 ? -sdt : sdt) * std::sqrt(z1 * z1 + z2 * z2 + z3 * z3);
                }
                const double q = a + b * y + c * y * y;
                if (uniform(rng) * bound * (1.0 + y * y / dt) < q) break;
            }
            const M K = s.A + y * s.B;
            const M dK = s.dA + y * s.dB;
            accumulate(K, dK, r, tau, out, dout);
            for (std::size_t j = 0; j < s.L.size(); ++j) accumulate(s.L[j], s.dL[j], r, tau, out, dout);
            norm = a + b * y + c * y * y;
            const double dw = y - re_trace(M(r * s.innovation)) * dt;
            rec.sum_dw2 += dw * dw;
            rec.sum_dy += y;
            hash.add(y);
            if (keep_record) rec.dy.push_back(y);
        }
        if (!(norm > 0.0)) throw NumericError(fmt::format("zero-probability outcome at step {}", k));
        r = out / norm;
        r = 0.5 * (r + r.adjoint()).eval();
        tau = dout / norm;
        tau = 0.5 * (tau + tau.adjoint()).eval();
        checkpoint(k + 1);
    }
    rec.tr_tau = re_trace(tau);
    rec.record_hash = hash.h;
    return rec;
}

TrajectoryKernel::TrajectoryKernel(const ParametricEmitterModel& model, double theta, double t_fin, double dt,
                                   Detection method, const TrajectoryOptions& opts)
    : impl_(std::make_unique<Impl>()) {
    auto& k = *impl_;
    k.method = method;
    k.theta = theta;
    k.t_fin = t_fin;
    k.dt = dt;
    k.phi = opts.phi;
    k.steps = bin_count(t_fin, dt);
    k.dim = model.dim;
    k.keep_record = opts.keep_record;
    k.rho0 = model.initial_state * model.initial_state.adjoint();
    for (double t : opts.checkpoint_times) {
        const long step = std::lround(t / dt);
        if (step < 0 || step > k.steps || std::abs(static_cast<double>(step) * dt - t) > 1e-9 * std::max(1.0, t))
            throw ConfigurationError(fmt::format("checkpoint time {} is not a step boundary in [0, {}]", t, t_fin));
        k.checkpoint_steps.push_back(step);
    }
    if (!std::is_sorted(k.checkpoint_steps.begin(), k.checkpoint_steps.end()))
        throw ConfigurationError("checkpoint times must be ascending");

    const double h = opts.fd_step > 0.0 ? opts.fd_step : (theta == 0.0 ? 1e-5 : 1e-5 * std::abs(theta));
    auto build = [&](auto& ops) {
        using M = typename std::decay_t<decltype(ops)>::value_type;
        using Mat = decltype(M::A);
        for (long n = 0; n < k.steps; ++n) {
            auto s = step_ops<Mat>(model, theta, h, static_cast<double>(n) * dt, dt, method, opts.phi);
            if (n == 1 && same_ops(s, ops.front())) {
                // probe the rest cheaply: time-independent models share one set
                bool constant = true;
                for (long m = 2; m < k.steps && constant; m += std::max(1L, k.steps / 16))
                    constant = same_ops(step_ops<Mat>(model, theta, h, static_cast<double>(m) * dt, dt, method, opts.phi),
                                        ops.front());
                if (constant) return;
            }
            ops.push_back(std::move(s));
        }
    };
    if (model.dim == 2)
        build(k.ops2);
    else
        build(k.opsx);
}

TrajectoryKernel::~TrajectoryKernel() = default;
TrajectoryKernel::TrajectoryKernel(TrajectoryKernel&&) noexcept = default;
TrajectoryKernel& TrajectoryKernel::operator=(TrajectoryKernel&&) noexcept = default;

TrajectoryRecord TrajectoryKernel::simulate(std::uint64_t seed) const {
    return impl_->dim == 2 ? impl_->run(impl_->ops2, seed) : impl_->run(impl_->opsx, seed);
}

Detection TrajectoryKernel::method() const { return impl_->method; }
long TrajectoryKernel::steps() const { return impl_->steps; }
double TrajectoryKernel::dt() const { return impl_->dt; }

TrajectoryRecord simulate_pd(const ParametricEmitterModel& model, double theta, double t_fin, double dt,
                             std::uint64_t seed) {
    TrajectoryOptions opts;
    opts.keep_record = true;
    return TrajectoryKernel(model, theta, t_fin, dt, Detection::pd, opts).simulate(seed);
}

TrajectoryRecord simulate_hd(const ParametricEmitterModel& model, double theta, double phi, double t_fin, double dt,
                             std::uint64_t seed) {
    TrajectoryOptions opts;
    opts.phi = phi;
    opts.keep_record = true;
    return TrajectoryKernel(model, theta, t_fin, dt, Detection::hd, opts).simulate(seed);
}

CfiEstimate estimate_cfi(const std::vector<TrajectoryRecord>& records) {
    if (records.size() < 2) throw ConfigurationError("at least two trajectory records are required");
    const auto& f = records.front();
    double s1 = 0.0, s2 = 0.0, q1 = 0.0, q2 = 0.0;
    for (const auto& r : records) {
        if (r.method != f.method || r.t_fin != f.t_fin || r.theta != f.theta || r.phi != f.phi || r.dt != f.dt)
            throw ConfigurationError("trajectory records come from different configurations");
        const double sq = r.tr_tau * r.tr_tau;
        s1 += r.tr_tau;
        s2 += r.tr_tau * r.tr_tau;
        q1 += sq;
        q2 += sq * sq;
    }
    const double n = static_cast<double>(records.size());
    CfiEstimate e;
    e.count = static_cast<long>(records.size());
    e.cfi = q1 / n;
    e.stderr_cfi = std::sqrt(std::max(0.0, (q2 - n * e.cfi * e.cfi) / (n - 1.0)) / n);
    e.mean_tr_tau = s1 / n;
    e.stderr_tr_tau = std::sqrt(std::max(0.0, (s2 - n * e.mean_tr_tau * e.mean_tr_tau) / (n - 1.0)) / n);
    return e;
}

EnsembleResult run_ensemble(const ParametricEmitterModel& model, double theta, double t_fin, double dt,
                            Detection method, long n_traj, std::uint64_t seed, int threads,
                            const TrajectoryOptions& opts) {
    if (n_traj < 2) throw ConfigurationError("an ensemble needs at least two trajectories");
    const TrajectoryKernel kernel(model, theta, t_fin, dt, method, opts);
    EnsembleResult out;
    out.records.resize(static_cast<std::size_t>(n_traj));
    const int workers = static_cast<int>(std::clamp<long>(threads, 1, n_traj));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    auto work = [&](int w) {
        try {
            for (long i = w; i < n_traj; i += workers)
                out.records[static_cast<std::size_t>(i)] = kernel.simulate(derive_seed(seed, static_cast<std::uint64_t>(i)));
        } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    out.cfi = estimate_cfi(out.records);
    out.checkpoint_times = opts.checkpoint_times;
    const double n = static_cast<double>(n_traj);
    for (std::size_t c = 0; c < opts.checkpoint_times.size(); ++c) {
        const Index d = model.dim;
        Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(d, d);
        Eigen::MatrixXd sr = Eigen::MatrixXd::Zero(d, d), si = sr;
        for (const auto& r : out.records) {
            const auto& m = r.checkpoints[c];
            sum += m;
            sr += m.real().cwiseAbs2();
            si += m.imag().cwiseAbs2();
        }
        const Eigen::MatrixXcd mean = sum / n;
        const Eigen::MatrixXd var_r = ((sr - n * mean.real().cwiseAbs2()) / (n - 1.0)).cwiseMax(0.0);
        const Eigen::MatrixXd var_i = ((si - n * mean.imag().cwiseAbs2()) / (n - 1.0)).cwiseMax(0.0);
        out.mean_state.push_back(mean);
        out.stderr_real.push_back((var_r / n).cwiseSqrt());
        out.stderr_imag.push_back((var_i / n).cwiseSqrt());
    }
    for (auto& r : out.records) r.checkpoints.clear();
    return out;
}

}  // namespace lightmpo
