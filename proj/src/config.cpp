#include "lightmpo/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "lightmpo/mpo.hpp"

namespace lightmpo {

namespace pt = boost::property_tree;

std::string to_string(Method m) {
    switch (m) {
        case Method::mpo_qfi: return "mpo_qfi";
        case Method::sub_qfi: return "sub_qfi";
        case Method::tsme_qfi: return "tsme_qfi";
        case Method::pd_cfi: return "pd_cfi";
        case Method::hd_cfi: return "hd_cfi";
    }
    return "?";
}

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s{
        {"experiment", {"case", "methods", "seed", "threads", "output_dir", "sweep_trace"}},
        {"model", {"gamma", "eta", "gamma_perp", "nbar", "pulse_duration", "pulse_center"}},
        {"grid", {"theta", "t_fin", "dt"}},
        {"mpo_qfi", {"eps_lsq", "eps_tol", "eps_tol_bonddim", "dx_max", "restarts", "delta", "max_sweeps"}},
        {"sub_qfi", {"eps", "difference"}},
        {"tsme_qfi", {"eps", "dt_ode"}},
        {"trajectories", {"n_traj", "dt", "phi"}},
    };
    return s;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::map<std::string, int> key_lines(const std::string& text) {
    std::map<std::string, int> out;
    std::istringstream is(text);
    std::string line, section;
    int n = 0;
    while (std::getline(is, line)) {
        ++n;
        const std::string t = trim(line);
        if (t.empty() || t[0] == ';' || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq != std::string::npos) out[section + "." + trim(t.substr(0, eq))] = n;
    }
    return out;
}

class Reader {
public:
    Reader(const pt::ptree& tree, const std::string& source, const std::map<std::string, int>& lines)
        : tree_(tree), source_(source), lines_(lines) {}

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        const auto it = lines_.find(key);
        const std::string where = it != lines_.end() ? fmt::format("{}:{}", source_, it->second) : source_;
        throw ConfigError(fmt::format("{}: {}: {}", where, key, msg));
    }

    bool has(const std::string& key) const { return static_cast<bool>(tree_.get_child_optional(pt::path(key, '.'))); }

    std::string text(const std::string& key) const {
        return trim(tree_.get<std::string>(pt::path(key, '.')));
    }

    double number(const std::string& key, const std::string& s) const {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &pos);
        } catch (const std::exception&) {
            fail(key, fmt::format("'{}' is not a number", s));
        }
        if (pos != s.size() || !std::isfinite(v)) fail(key, fmt::format("'{}' is not a finite number", s));
        return v;
    }

    double number(const std::string& key, double fallback) const { return has(key) ? number(key, text(key)) : fallback; }

    long integer(const std::string& key, long fallback) const {
        if (!has(key)) return fallback;
        const std::string s = text(key);
        std::size_t pos = 0;
        long v = 0;
        try {
            v = std::stol(s, &pos);
        } catch (const std::exception&) {
            fail(key, fmt::format("'{}' is not an integer", s));
        }
        if (pos != s.size()) fail(key, fmt::format("'{}' is not an integer", s));
        return v;
    }

    std::vector<std::string> items(const std::string& key) const {
        std::vector<std::string> out;
        std::stringstream ss(text(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) fail(key, "empty list element");
            out.push_back(item);
        }
        return out;
    }

    // "a, b, c" or "start:stop:step"
    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const {
        if (!has(key)) return fallback;
        const std::string s = text(key);
        if (s.empty()) return {};
        if (s.find(':') != std::string::npos) {
            std::vector<std::string> parts;
            std::stringstream ss(s);
            std::string p;
            while (std::getline(ss, p, ':')) parts.push_back(trim(p));
            if (parts.size() != 3) fail(key, "range must read start:stop:step");
            const double a = number(key, parts[0]), b = number(key, parts[1]), h = number(key, parts[2]);
            if (!(h > 0.0) || b < a) fail(key, "range needs step > 0 and stop >= start");
            std::vector<double> out;
            const long n = std::lround(std::floor((b - a) / h + 1e-9));
            for (long k = 0; k <= n; ++k) out.push_back(a + static_cast<double>(k) * h);
            return out;
        }
        std::vector<double> out;
        for (const auto& item : items(key)) out.push_back(number(key, item));
        return out;
    }

    bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string s = text(key);
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        fail(key, fmt::format("'{}' is not a boolean", s));
    }

private:
    const pt::ptree& tree_;
    std::string source_;
    const std::map<std::string, int>& lines_;
};

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
    pt::ptree tree;
    try {
        std::istringstream is(text);
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(fmt::format("{}:{}: {}", source, e.line(), e.message()));
    }

    ExperimentConfig c;
    c.source = source;
    c.lines = key_lines(text);
    const Reader r(tree, source, c.lines);

    for (const auto& [section, body] : tree) {
        const auto it = schema().find(section);
        if (it == schema().end()) {
            if (body.empty()) r.fail(section, "key outside any section");
            r.fail(section, "unknown section");
        }
        for (const auto& [key, value] : body) {
            if (!value.empty()) r.fail(section + "." + key, "nested keys are not supported");
            if (!it->second.count(key)) r.fail(section + "." + key, "unknown key");
        }
    }

    if (!r.has("experiment.case")) r.fail("experiment.case", "missing (rabi or pulsed)");
    const std::string kind = r.text("experiment.case");
    if (kind == "rabi")
        c.kind = Case::rabi;
    else if (kind == "pulsed")
        c.kind = Case::pulsed;
    else
        r.fail("experiment.case", fmt::format("'{}' is not rabi or pulsed", kind));

    if (r.has("experiment.methods") && !r.text("experiment.methods").empty()) {
        for (const auto& m : r.items("experiment.methods")) {
            const std::map<std::string, Method> names{{"mpo_qfi", Method::mpo_qfi}, {"sub_qfi", Method::sub_qfi},
                                                      {"tsme_qfi", Method::tsme_qfi}, {"pd_cfi", Method::pd_cfi},
                                                      {"hd_cfi", Method::hd_cfi}};
            if (m == "all") {
                for (const auto& [_, v] : names) c.methods.push_back(v);
                continue;
            }
            const auto it = names.find(m);
            if (it == names.end()) r.fail("experiment.methods", fmt::format("unknown method '{}'", m));
            c.methods.push_back(it->second);
        }
        std::sort(c.methods.begin(), c.methods.end());
        c.methods.erase(std::unique(c.methods.begin(), c.methods.end()), c.methods.end());
    }
    const long seed = r.integer("experiment.seed", 0);
    if (seed < 0) r.fail("experiment.seed", "must be nonnegative");
    c.seed = static_cast<std::uint64_t>(seed);
    c.threads = static_cast<int>(r.integer("experiment.threads", 1));
    if (r.has("experiment.output_dir")) c.output_dir = r.text("experiment.output_dir");
    c.write_sweep_trace = r.boolean("experiment.sweep_trace", false);

    c.gamma = r.number("model.gamma", 1.0);
    c.etas = r.numbers("model.eta", {1.0});
    c.gamma_perps = r.numbers("model.gamma_perp", {0.0});
    c.nbars = r.numbers("model.nbar", {1.0});
    c.pulse_duration = r.number("model.pulse_duration", 0.1);
    c.pulse_center = r.number("model.pulse_center", 6.5 * c.pulse_duration);

    c.thetas = r.numbers("grid.theta", {});
    c.t_fins = r.numbers("grid.t_fin", {});
    c.dt = r.number("grid.dt", 0.05);

    c.qfi.rank_tol = r.number("mpo_qfi.eps_lsq", kDefaultRankTol);
    c.qfi.eps_tol = r.number("mpo_qfi.eps_tol", 1e-2);
    c.qfi.eps_tol_bonddim = r.number("mpo_qfi.eps_tol_bonddim", 1e-2);
    c.qfi.dx_max = static_cast<int>(r.integer("mpo_qfi.dx_max", 8));
    c.qfi.restarts = static_cast<int>(r.integer("mpo_qfi.restarts", 20));
    c.qfi.max_sweeps = static_cast<int>(r.integer("mpo_qfi.max_sweeps", 200));
    c.delta = r.number("mpo_qfi.delta", 0.0);

    c.sub.eps = r.number("sub_qfi.eps", 0.0);
    if (r.has("sub_qfi.difference")) {
        const std::string d = r.text("sub_qfi.difference");
        if (d == "one_sided")
            c.sub.difference = Difference::one_sided;
        else if (d == "symmetric")
            c.sub.difference = Difference::symmetric;
        else
            r.fail("sub_qfi.difference", fmt::format("'{}' is not one_sided or symmetric", d));
    }

    c.tsme_eps = r.number("tsme_qfi.eps", 0.0);
    c.dt_ode = r.number("tsme_qfi.dt_ode", 0.0);

    c.n_traj = r.integer("trajectories.n_traj", 2000);
    c.traj_dt = r.number("trajectories.dt", 0.001);
    c.phi = r.number("trajectories.phi", 1.5707963267948966);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError(fmt::format("{}: cannot open", path.string()));
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::vector<ModelVariant> ExperimentConfig::variants() const {
    std::vector<ModelVariant> out;
    if (kind == Case::rabi) {
        for (double e : etas) out.push_back({e, 0.0, 1.0});
    } else {
        for (double g : gamma_perps)
            for (double n : nbars) out.push_back({1.0, g, n});
    }
    return out;
}

ParametricEmitterModel ExperimentConfig::build_model(const ModelVariant& v) const {
    if (kind == Case::rabi) return build_rabi_model(gamma, v.eta);
    PulseEnvelope pulse;
    pulse.duration = pulse_duration;
    pulse.center = pulse_center;
    pulse.mean_photons = v.nbar;
    return build_pulsed_model(v.gamma_perp, pulse);
}

ValidationReport validate(const ExperimentConfig& c) {
    ValidationReport rep;
    auto where = [&c](const std::string& key) {
        const auto it = c.lines.find(key);
        return it != c.lines.end() ? fmt::format("{}:{}: {}", c.source, it->second, key)
                                   : fmt::format("{}: {}", c.source, key);
    };
    auto error = [&](const std::string& key, const std::string& msg) {
        rep.errors.push_back(fmt::format("{}: {}", where(key), msg));
    };
    auto warn = [&](const std::string& key, const std::string& msg) {
        rep.warnings.push_back(fmt::format("{}: {}", where(key), msg));
    };
    auto has = [&c](Method m) { return std::find(c.methods.begin(), c.methods.end(), m) != c.methods.end(); };

    if (c.methods.empty()) error("experiment.methods", "no method selected");
    if (c.threads < 1) error("experiment.threads", "must be at least 1");
    if (c.thetas.empty()) error("grid.theta", "grid is empty");
    if (c.t_fins.empty()) error("grid.t_fin", "grid is empty");
    for (double t : c.t_fins)
        if (!(t > 0.0)) error("grid.t_fin", fmt::format("final time {} must be positive", t));
    if (!(c.dt > 0.0)) error("grid.dt", "must be positive");

    if (c.kind == Case::rabi) {
        if (!(c.gamma > 0.0)) error("model.gamma", "must be positive");
        if (c.etas.empty()) error("model.eta", "list is empty");
        for (double e : c.etas)
            if (!(e >= 0.0 && e <= 1.0)) error("model.eta", fmt::format("{} is outside [0, 1]", e));
        if (has(Method::sub_qfi) && std::find(c.etas.begin(), c.etas.end(), 1.0) != c.etas.end())
            rep.notes.push_back(
                fmt::format("{}: eta = 1 leaves no environment; sub-QFI there should equal the MPO-QFI",
                            where("model.eta")));
    } else {
        if (c.gamma_perps.empty()) error("model.gamma_perp", "list is empty");
        for (double g : c.gamma_perps)
            if (!(g >= 0.0)) error("model.gamma_perp", fmt::format("{} must be nonnegative", g));
        if (c.nbars.empty()) error("model.nbar", "list is empty");
        for (double n : c.nbars)
            if (!(n >= 0.0)) error("model.nbar", fmt::format("{} must be nonnegative", n));
        if (!(c.pulse_duration > 0.0)) error("model.pulse_duration", "must be positive");
        for (double th : c.thetas)
            if (!(th > 0.0)) error("grid.theta", fmt::format("decay rate {} must be positive", th));
    }

    const bool lattice = has(Method::mpo_qfi) || has(Method::sub_qfi);
    if (lattice && c.dt > 0.0)
        for (double t : c.t_fins) {
            if (!(t > 0.0)) continue;
            try {
                (void)bin_count(t, c.dt);
            } catch (const ConfigurationError& e) {
                error("grid.dt", e.what());
            }
        }

    if (has(Method::mpo_qfi)) {
        if (!(c.qfi.rank_tol > 0.0)) error("mpo_qfi.eps_lsq", "must be positive");
        if (!(c.qfi.eps_tol > 0.0)) error("mpo_qfi.eps_tol", "must be positive");
        if (!(c.qfi.eps_tol_bonddim > 0.0)) error("mpo_qfi.eps_tol_bonddim", "must be positive");
        if (c.qfi.dx_max < 1) error("mpo_qfi.dx_max", "must be at least 1");
        if (c.qfi.restarts < 1) error("mpo_qfi.restarts", "must be at least 1");
        if (c.qfi.max_sweeps < 1) error("mpo_qfi.max_sweeps", "must be at least 1");
        if (c.delta < 0.0) error("mpo_qfi.delta", "must be nonnegative (0 selects the default)");
    }
    if (has(Method::sub_qfi) && c.sub.eps < 0.0) error("sub_qfi.eps", "must be nonnegative (0 selects the default)");
    if (has(Method::tsme_qfi)) {
        if (c.tsme_eps < 0.0) error("tsme_qfi.eps", "must be nonnegative (0 selects the default)");
        if (c.dt_ode < 0.0) error("tsme_qfi.dt_ode", "must be nonnegative (0 selects the default)");
    }
    const bool traj = has(Method::pd_cfi) || has(Method::hd_cfi);
    if (traj) {
        if (c.n_traj < 2) error("trajectories.n_traj", "must be at least 2");
        if (!(c.traj_dt > 0.0)) {
            error("trajectories.dt", "must be positive");
        } else {
            for (double t : c.t_fins) {
                if (!(t > 0.0)) continue;
                try {
                    (void)bin_count(t, c.traj_dt);
                } catch (const ConfigurationError& e) {
                    error("trajectories.dt", e.what());
                }
            }
        }
    }

    // step sizes against the fastest timescale
    if (rep.errors.empty()) {
        double fastest = 0.0;
        if (c.kind == Case::rabi) {
            fastest = 1.0 / c.gamma;
            for (double th : c.thetas)
                if (th != 0.0) fastest = std::min(fastest, 1.0 / std::abs(th));
        } else {
            fastest = c.pulse_duration;
            for (double th : c.thetas) fastest = std::min(fastest, 1.0 / th);
        }
        if (lattice && c.dt > 0.1 * fastest)
            warn("grid.dt", fmt::format("bin width {} exceeds 0.1 x fastest timescale {}", c.dt, fastest));
        if (traj && c.traj_dt > 0.01 * fastest)
            warn("trajectories.dt", fmt::format("step {} exceeds 0.01 x fastest timescale {}", c.traj_dt, fastest));
        if (has(Method::tsme_qfi) && c.dt_ode > 0.01 * fastest)
            warn("tsme_qfi.dt_ode", fmt::format("step {} exceeds 0.01 x fastest timescale {}", c.dt_ode, fastest));
    }
    return rep;
}

}  // namespace lightmpo
