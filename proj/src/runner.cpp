#include "lightmpo/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "lightmpo/dense_oracle.hpp"
#include "lightmpo/mpo.hpp"
#include "lightmpo/qfi.hpp"
#include "lightmpo/seeding.hpp"
#include "lightmpo/subqfi.hpp"
#include "lightmpo/trajectories.hpp"
#include "lightmpo/tsme.hpp"

namespace lightmpo {

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string join(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    return out;
}

struct Point {
    Method method;
    int variant;
    int theta;
    int t_fin;  // -1: whole t_fin series (tsme)
};

struct Output {
    std::vector<std::string> results;
    std::vector<std::string> sub;
    std::vector<std::string> tsme;
    std::vector<std::string> trajectories;
    std::vector<std::string> cfi;
    std::vector<std::string> trace;
    long flagged = 0;
    long errors = 0;
    std::vector<std::string> messages;
};

class Runner {
public:
    explicit Runner(const ExperimentConfig& c) : c_(c), variants_(c.variants()) {}

    std::vector<Point> points() const {
        std::vector<Point> out;
        for (Method m : c_.methods)
            for (int v = 0; v < static_cast<int>(variants_.size()); ++v)
                for (int th = 0; th < static_cast<int>(c_.thetas.size()); ++th) {
                    if (m == Method::tsme_qfi) {
                        out.push_back({m, v, th, -1});
                        continue;
                    }
                    for (int t = 0; t < static_cast<int>(c_.t_fins.size()); ++t) out.push_back({m, v, th, t});
                }
        return out;
    }

    static std::string results_header() {
        return "case,method,gamma,eta,gamma_perp,nbar,pulse_duration,pulse_center,theta,t_fin,dt,value,stderr,"
               "gamma_t,fi_per_gamma_t,Gamma2_fi_per_nbar,status,detail,"
               "eps_lsq,eps_tol,eps_tol_bonddim,dx_max,restarts,delta,max_sweeps,"
               "sub_eps,sub_difference,tsme_eps,dt_ode,n_traj,traj_dt,phi,seed";
    }

    Output evaluate(const Point& p, int inner_threads) const {
        Output out;
        try {
            switch (p.method) {
                case Method::mpo_qfi: mpo(p, inner_threads, out); break;
                case Method::sub_qfi: sub(p, out); break;
                case Method::tsme_qfi: tsme(p, out); break;
                case Method::pd_cfi:
                case Method::hd_cfi: trajectories(p, inner_threads, out); break;
            }
        } catch (const std::exception& e) {
            ++out.errors;
            out.messages.push_back(fmt::format("{} failed at {}: {}", to_string(p.method), where(p), e.what()));
            const std::vector<int> ts = p.t_fin >= 0 ? std::vector<int>{p.t_fin} : all_times();
            for (int t : ts)
                out.results.push_back(result_row(p, t, NAN, NAN, "error", e.what(), p.method == Method::mpo_qfi ? delta(p) : 0.0));
        }
        return out;
    }

private:
    const ExperimentConfig& c_;
    std::vector<ModelVariant> variants_;

    std::vector<int> all_times() const {
        std::vector<int> v(c_.t_fins.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int>(i);
        return v;
    }

    std::string where(const Point& p) const {
        const auto& v = variants_[static_cast<std::size_t>(p.variant)];
        std::string s = c_.kind == Case::rabi ? fmt::format("eta={}", v.eta)
                                              : fmt::format("gamma_perp={} nbar={}", v.gamma_perp, v.nbar);
        s += fmt::format(" theta={}", c_.thetas[static_cast<std::size_t>(p.theta)]);
        if (p.t_fin >= 0) s += fmt::format(" t_fin={}", c_.t_fins[static_cast<std::size_t>(p.t_fin)]);
        return s;
    }

    std::uint64_t point_seed(const Point& p, int t) const {
        std::uint64_t s = derive_seed(c_.seed, static_cast<std::uint64_t>(p.method));
        s = derive_seed(s, static_cast<std::uint64_t>(p.variant));
        s = derive_seed(s, static_cast<std::uint64_t>(p.theta));
        return derive_seed(s, static_cast<std::uint64_t>(t));
    }

    double delta(const Point& p) const {
        return c_.delta > 0.0 ? c_.delta : default_fd_step(c_.thetas[static_cast<std::size_t>(p.theta)]);
    }

    std::vector<std::string> variant_cells(int v) const {
        const auto& m = variants_[static_cast<std::size_t>(v)];
        return {num(m.eta), num(m.gamma_perp), num(m.nbar)};
    }

    std::string result_row(const Point& p, int t, double value, double err, const std::string& status,
                           const std::string& detail, double used_delta, double step = -1.0) const {
        const auto& v = variants_[static_cast<std::size_t>(p.variant)];
        const double theta = c_.thetas[static_cast<std::size_t>(p.theta)];
        const double t_fin = c_.t_fins[static_cast<std::size_t>(t)];
        const bool rabi = c_.kind == Case::rabi;
        const double rate = rabi ? c_.gamma : theta;
        const double fi_per_t = rabi ? c_.gamma * value / t_fin : NAN;
        const double per_nbar = rabi ? NAN : theta * theta * value / v.nbar;
        if (step < 0.0) step = (p.method == Method::pd_cfi || p.method == Method::hd_cfi) ? c_.traj_dt : c_.dt;
        return join({rabi ? "rabi" : "pulsed", to_string(p.method), num(c_.gamma), num(v.eta), num(v.gamma_perp),
                     num(v.nbar), num(c_.pulse_duration), num(c_.pulse_center), num(theta), num(t_fin), num(step),
                     num(value), num(err), num(rate * t_fin), num(fi_per_t), num(per_nbar), status, quote(detail),
                     num(c_.qfi.rank_tol), num(c_.qfi.eps_tol), num(c_.qfi.eps_tol_bonddim),
                     std::to_string(c_.qfi.dx_max), std::to_string(c_.qfi.restarts), num(used_delta),
                     std::to_string(c_.qfi.max_sweeps), num(c_.sub.eps),
                     c_.sub.difference == Difference::symmetric ? "symmetric" : "one_sided", num(c_.tsme_eps),
                     num(c_.dt_ode), std::to_string(c_.n_traj), num(c_.traj_dt), num(c_.phi),
                     std::to_string(c_.seed)});
    }

    void mpo(const Point& p, int inner_threads, Output& out) const {
        const auto model = c_.build_model(variants_[static_cast<std::size_t>(p.variant)]);
        const double theta = c_.thetas[static_cast<std::size_t>(p.theta)];
        const double t_fin = c_.t_fins[static_cast<std::size_t>(p.t_fin)];
        const double d = delta(p);
        const auto rho = build_light_mpo(model, theta, t_fin, c_.dt);
        const auto drho = build_deriv_mpo(model, theta, d, t_fin, c_.dt);
        QfiOptions opts = c_.qfi;
        opts.seed = point_seed(p, p.t_fin);
        opts.threads = inner_threads;
        opts.record_trace = c_.write_sweep_trace;
        const auto q = compute_qfi(rho, drho, opts);
        std::string status = "ok";
        std::string detail = fmt::format("D_X={} spread={:.6g} rejected={} rank_deficient={}",
                                         q.steps.empty() ? 0 : q.steps.back().bond_dim, q.restart_spread,
                                         q.rejected_updates, q.rank_deficient_solves);
        if (!q.converged) {
            status = "not_converged";
            ++out.flagged;
            out.messages.push_back(fmt::format("mpo_qfi did not converge at {}", where(p)));
        }
        const double err = q.restart_values.size() > 1 ? q.restart_spread : NAN;
        out.results.push_back(result_row(p, p.t_fin, q.value, err, status, detail, d));
        const auto vc = variant_cells(p.variant);
        for (const auto& r : q.trace)
            out.trace.push_back(join({vc[0], vc[1], vc[2], num(theta), num(t_fin), std::to_string(r.restart),
                                      std::to_string(r.bond_dim), std::to_string(r.sweep), num(r.objective)}));
    }

    void sub(const Point& p, Output& out) const {
        const auto model = c_.build_model(variants_[static_cast<std::size_t>(p.variant)]);
        const double theta = c_.thetas[static_cast<std::size_t>(p.theta)];
        const double t_fin = c_.t_fins[static_cast<std::size_t>(p.t_fin)];
        const auto s = sub_qfi(model, theta, t_fin, c_.dt, c_.sub);
        out.results.push_back(result_row(p, p.t_fin, s.value, std::abs(s.richardson - s.value), "ok",
                                         fmt::format("richardson={:.10g}", s.richardson), 0.0));
        const auto vc = variant_cells(p.variant);
        out.sub.push_back(join({num(theta), num(s.eps), num(s.value), num(s.richardson), num(s.overlap),
                                num(s.purity1), num(s.purity2), num(t_fin), num(c_.dt), vc[0], vc[1], vc[2]}));
    }

    void tsme(const Point& p, Output& out) const {
        const auto model = c_.build_model(variants_[static_cast<std::size_t>(p.variant)]);
        const double theta = c_.thetas[static_cast<std::size_t>(p.theta)];
        std::vector<int> order = all_times();
        std::sort(order.begin(), order.end(), [this](int a, int b) {
            return c_.t_fins[static_cast<std::size_t>(a)] < c_.t_fins[static_cast<std::size_t>(b)];
        });
        std::vector<double> sorted;
        for (int i : order) sorted.push_back(c_.t_fins[static_cast<std::size_t>(i)]);
        const auto series = tsme_qfi_series(model, theta, c_.tsme_eps, sorted, c_.dt_ode);
        std::vector<TsmeQfiResult> by_index(c_.t_fins.size());
        for (std::size_t k = 0; k < order.size(); ++k) by_index[static_cast<std::size_t>(order[k])] = series[k];
        const auto vc = variant_cells(p.variant);
        for (int t : all_times()) {
            const auto& r = by_index[static_cast<std::size_t>(t)];
            std::string status = "ok";
            if (r.accuracy_warning) {
                status = "accuracy_warning";
                ++out.flagged;
                out.messages.push_back(fmt::format("tsme_qfi at {} t_fin={}: {}", where(p),
                                                   c_.t_fins[static_cast<std::size_t>(t)], r.warning));
            }
            Point q = p;
            q.t_fin = t;
            out.results.push_back(result_row(q, t, r.value, std::abs(r.richardson - r.value), status,
                                             fmt::format("halving_change={:.3g}", r.halving_change), 0.0, r.dt_ode));
            out.tsme.push_back(join({num(c_.t_fins[static_cast<std::size_t>(t)]), num(theta), num(r.eps),
                                     num(r.fidelity), num(r.value), num(r.richardson), num(r.dt_ode), vc[0], vc[1],
                                     vc[2]}));
        }
    }

    void trajectories(const Point& p, int inner_threads, Output& out) const {
        const auto model = c_.build_model(variants_[static_cast<std::size_t>(p.variant)]);
        const double theta = c_.thetas[static_cast<std::size_t>(p.theta)];
        const double t_fin = c_.t_fins[static_cast<std::size_t>(p.t_fin)];
        const Detection det = p.method == Method::pd_cfi ? Detection::pd : Detection::hd;
        TrajectoryOptions opts;
        opts.phi = c_.phi;
        const auto ens = run_ensemble(model, theta, t_fin, c_.traj_dt, det, c_.n_traj, point_seed(p, p.t_fin),
                                      inner_threads, opts);
        const auto& e = ens.cfi;
        std::string status = "ok";
        if (std::abs(e.mean_tr_tau) > 3.0 * e.stderr_tr_tau) {
            status = "score_mean_nonzero";
            ++out.flagged;
            out.messages.push_back(fmt::format("{} at {}: mean score {:.4g} exceeds 3 standard errors ({:.4g})",
                                               to_string(p.method), where(p), e.mean_tr_tau, e.stderr_tr_tau));
        }
        out.results.push_back(result_row(p, p.t_fin, e.cfi, e.stderr_cfi, status,
                                         fmt::format("mean_tr_tau={:.6g}+-{:.3g}", e.mean_tr_tau, e.stderr_tr_tau),
                                         0.0));
        const auto vc = variant_cells(p.variant);
        for (const auto& r : ens.records) {
            const std::string tag = det == Detection::pd ? std::to_string(r.jumps) : fmt::format("{:016x}", r.record_hash);
            out.trajectories.push_back(join({std::to_string(r.seed), num(t_fin), num(theta), to_string(det),
                                             num(r.phi), num(r.tr_tau), tag, vc[0], vc[1], vc[2], num(c_.traj_dt)}));
        }
        out.cfi.push_back(join({num(theta), to_string(det), num(e.cfi), num(e.stderr_cfi), std::to_string(e.count),
                                num(t_fin), num(e.mean_tr_tau), num(e.stderr_tr_tau), num(c_.phi), num(c_.traj_dt),
                                vc[0], vc[1], vc[2]}));
    }
};

void write_csv(const std::filesystem::path& path, const std::string& header, const std::vector<std::string>& rows) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
    os << header << '\n';
    for (const auto& r : rows) os << r << '\n';
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& config, std::ostream& log) {
    const Runner runner(config);
    const auto pts = runner.points();
    const int outer = std::clamp<int>(config.threads, 1, std::max<int>(1, static_cast<int>(pts.size())));
    const int inner = std::max(1, config.threads / outer);

    std::vector<Output> outputs(pts.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < pts.size(); i = next++) {
            outputs[i] = runner.evaluate(pts[i], inner);
            const std::lock_guard<std::mutex> lock(log_mutex);
            log << fmt::format("[{}/{}] {}\n", i + 1, pts.size(), to_string(pts[i].method));
            for (const auto& m : outputs[i].messages) log << "  " << m << '\n';
            log.flush();
        }
    };
    std::vector<std::thread> pool;
    for (int k = 1; k < outer; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    Output all;
    for (auto& o : outputs) {
        auto append = [](std::vector<std::string>& to, std::vector<std::string>& from) {
            to.insert(to.end(), std::make_move_iterator(from.begin()), std::make_move_iterator(from.end()));
        };
        append(all.results, o.results);
        append(all.sub, o.sub);
        append(all.tsme, o.tsme);
        append(all.trajectories, o.trajectories);
        append(all.cfi, o.cfi);
        append(all.trace, o.trace);
        all.flagged += o.flagged;
        all.errors += o.errors;
    }

    RunSummary summary;
    summary.rows = static_cast<long>(all.results.size());
    summary.flagged = all.flagged;
    summary.errors = all.errors;
    std::filesystem::create_directories(config.output_dir);
    auto emit = [&](const std::string& name, const std::string& header, const std::vector<std::string>& rows) {
        const auto path = config.output_dir / name;
        write_csv(path, header, rows);
        summary.files.push_back(path);
    };
    auto has = [&config](Method m) {
        return std::find(config.methods.begin(), config.methods.end(), m) != config.methods.end();
    };
    emit("results.csv", Runner::results_header(), all.results);
    if (has(Method::sub_qfi))
        emit("subqfi.csv", "theta,eps,subqfi,subqfi_richardson,tr12,purity1,purity2,t_fin,dt,eta,gamma_perp,nbar",
             all.sub);
    if (has(Method::tsme_qfi))
        emit("tsme.csv", "t,theta,eps,fidelity,tsme_qfi,tsme_qfi_richardson,dt_ode,eta,gamma_perp,nbar", all.tsme);
    if (has(Method::pd_cfi) || has(Method::hd_cfi)) {
        emit("trajectories.csv",
             "seed,t_fin,theta,method,phi,tr_tau,jumps_or_record_hash,eta,gamma_perp,nbar,dt", all.trajectories);
        emit("cfi.csv", "theta,method,cfi,stderr,n_traj,t_fin,mean_tr_tau,stderr_tr_tau,phi,dt,eta,gamma_perp,nbar",
             all.cfi);
    }
    if (config.write_sweep_trace && has(Method::mpo_qfi))
        emit("sweep_trace.csv", "eta,gamma_perp,nbar,theta,t_fin,restart,bond_dim,sweep,objective", all.trace);
    return summary;
}

bool OracleCheckReport::pass() const {
    return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const OracleCheckRow& r) { return r.pass; });
}

OracleCheckReport oracle_check(const OracleCheckOptions& opts, std::ostream& log) {
    OracleCheckReport rep;
    log << fmt::format("{:>4} {:>5} {:>10} {:>10} {:>12} {:>12} {:>9} {:>12} {:>12} {:>9}  {}\n", "N", "eta",
                       "recon_err", "deriv_err", "exact_qfi", "mpo_qfi", "rel_err", "dense_sub", "sub_qfi",
                       "rel_err", "result");
    for (double eta : opts.etas) {
        const auto model = build_rabi_model(opts.gamma, eta);
        const double theta = opts.omega;
        const double delta = default_fd_step(theta);
        for (int n : opts.bins) {
            OracleCheckRow row;
            row.bins = n;
            row.eta = eta;
            const double t_fin = n * opts.dt;
            const auto rho = build_light_mpo(model, theta, t_fin, opts.dt);
            const auto drho = build_deriv_mpo(model, theta, delta, t_fin, opts.dt);
            const auto dense = dense_light_state(model, theta, n, opts.dt);
            const Eigen::MatrixXcd ddense = dense_light_derivative(model, theta, delta, n, opts.dt);
            row.reconstruction_error = (to_dense(rho.mpo) - dense.rho).cwiseAbs().maxCoeff();
            row.derivative_error = (to_dense(drho.mpo) - ddense).cwiseAbs().maxCoeff();

            row.exact_qfi = exact_qfi(dense.rho, ddense).value;
            QfiOptions q;
            q.restarts = opts.restarts;
            q.seed = derive_seed(opts.seed, static_cast<std::uint64_t>(n));
            q.threads = opts.threads;
            row.mpo_qfi = compute_qfi(rho, drho, q).value;
            row.qfi_rel_error = std::abs(row.mpo_qfi - row.exact_qfi) / row.exact_qfi;

            const SubQfiOptions so;
            const auto s = sub_qfi(model, theta, t_fin, opts.dt, so);
            const Eigen::MatrixXcd r2 = dense_light_state(model, theta + s.eps, n, opts.dt).rho;
            const Eigen::MatrixXcd a = dense.rho / dense.rho.trace().real();
            const Eigen::MatrixXcd b = r2 / r2.trace().real();
            const auto terms = super_fidelity_from_traces((a * b).trace().real(), (a * a).trace().real(),
                                                          (b * b).trace().real());
            row.sub_qfi = s.value;
            row.dense_sub_qfi = 8.0 * (1.0 - terms.value) / (s.eps * s.eps);
            row.sub_rel_error = std::abs(row.sub_qfi - row.dense_sub_qfi) / row.dense_sub_qfi;

            row.pass = row.reconstruction_error <= kOracleReconstructionTol && row.qfi_rel_error <= kOracleQfiTol &&
                       row.sub_rel_error <= kOracleSubTol && row.sub_qfi <= row.exact_qfi * (1.0 + kOracleQfiTol);
            log << fmt::format("{:>4} {:>5} {:>10.2e} {:>10.2e} {:>12.6g} {:>12.6g} {:>9.2e} {:>12.6g} {:>12.6g} "
                               "{:>9.2e}  {}\n",
                               n, eta, row.reconstruction_error, row.derivative_error, row.exact_qfi, row.mpo_qfi,
                               row.qfi_rel_error, row.dense_sub_qfi, row.sub_qfi, row.sub_rel_error,
                               row.pass ? "PASS" : "FAIL");
            log.flush();
            rep.rows.push_back(row);
        }
    }
    if (!opts.csv.empty()) {
        std::vector<std::string> rows;
        for (const auto& r : rep.rows)
            rows.push_back(join({std::to_string(r.bins), num(r.eta), num(opts.omega), num(opts.dt),
                                 num(r.reconstruction_error), num(r.derivative_error), num(r.exact_qfi),
                                 num(r.mpo_qfi), num(r.qfi_rel_error), num(r.dense_sub_qfi), num(r.sub_qfi),
                                 num(r.sub_rel_error), r.pass ? "pass" : "fail"}));
        if (opts.csv.has_parent_path()) std::filesystem::create_directories(opts.csv.parent_path());
        write_csv(opts.csv,
                  "bins,eta,theta,dt,reconstruction_error,derivative_error,exact_qfi,mpo_qfi,qfi_rel_error,"
                  "dense_subqfi,subqfi,subqfi_rel_error,result",
                  rows);
    }
    return rep;
}

}  // namespace lightmpo
