#pragma once

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "locmoment/birman_schwinger.hpp"
#include "locmoment/correlators.hpp"
#include "locmoment/criterion.hpp"
#include "locmoment/hilbert.hpp"
#include "locmoment/model.hpp"
#include "locmoment/moments.hpp"
#include "locmoment/spectra.hpp"
#include "locmoment/version.hpp"

namespace locmoment::harness {

using json = nlohmann::json;

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
    std::string kind;
    model::ModelSpec spec;
    json params;
    std::uint64_t seed = 0;
    std::string out = "results";
    int workers = 1;
    json raw;  // the full document, for provenance
};

inline const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> kinds = {
        "criterion", "decay", "tails",  "boole",         "bs",  "shift",
        "dos",       "dynamics", "hilbert", "largedisorder", "msa", "holder"};
    return kinds;
}

inline ExperimentConfig parse_config(const json& j) {
    try {
        model::detail::check_keys(
            j, {"kind", "model", "params", "seed", "out", "workers"}, "config");
        ExperimentConfig c;
        c.kind = j.at("kind").get<std::string>();
        bool known = false;
        for (const auto& k : experiment_kinds()) known = known || k == c.kind;
        if (!known) throw ConfigError("unknown experiment kind '" + c.kind + "'");
        c.spec = model::spec_from_json(j.at("model"));
        c.params = j.value("params", json::object());
        c.seed = j.value("seed", std::uint64_t{0});
        c.out = j.value("out", std::string("results"));
        c.workers = j.value("workers", 1);
        if (c.workers < 1) throw ConfigError("workers must be >= 1");
        c.raw = j;
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

inline ExperimentConfig config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

// ---- result tables and CSV ----------------------------------------------

struct ResultTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    json config;
};

inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(bool v) { return v ? "1" : "0"; }

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string render_body(const ResultTable& t) {
    std::ostringstream os;
    for (std::size_t c = 0; c < t.columns.size(); ++c)
        os << (c ? "," : "") << csv_escape(t.columns[c]);
    os << "\n";
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c)
            os << (c ? "," : "") << csv_escape(row[c]);
        os << "\n";
    }
    return os.str();
}

inline std::string render_file(const ResultTable& t, bool with_timestamp = true) {
    std::ostringstream os;
    const std::string cfg = t.config.dump();
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a(cfg)));
    os << "# locmoment " << LOCMOMENT_VERSION << "\n";
    os << "# table: " << t.name << "\n";
    os << "# config: " << cfg << "\n";
    os << "# config_hash: " << hex << "\n";
    if (with_timestamp) {
        std::time_t now = std::time(nullptr);
        char buf[64];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        os << "# generated: " << buf << "\n";
    }
    os << render_body(t);
    return os.str();
}

inline std::vector<std::string> write_results(
    const std::vector<ResultTable>& tables, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> paths;
    for (const auto& t : tables) {
        const std::string path = dir + "/" + t.name + ".csv";
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write '" + path + "'");
        out << render_file(t);
        paths.push_back(path);
    }
    return paths;
}

/// Re-hash the embedded config of every result file in a directory and
/// check the declared column counts.
inline bool verify_dir(const std::string& dir, std::string* diagnostic = nullptr) {
    bool any = false;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".csv") continue;
        any = true;
        std::ifstream in(entry.path());
        std::string line, cfg, declared;
        std::size_t ncols = 0;
        bool header_done = false;
        while (std::getline(in, line)) {
            if (!line.empty() && line[0] == '#') {
                if (line.rfind("# config: ", 0) == 0) cfg = line.substr(10);
                if (line.rfind("# config_hash: ", 0) == 0) declared = line.substr(15);
                continue;
            }
            std::size_t commas = 0;
            bool quoted = false;
            for (char ch : line) {
                if (ch == '"') quoted = !quoted;
                if (ch == ',' && !quoted) ++commas;
            }
            if (!header_done) {
                ncols = commas + 1;
                header_done = true;
            } else if (!line.empty() && commas + 1 != ncols) {
                if (diagnostic)
                    *diagnostic = entry.path().string() + ": ragged row";
                return false;
            }
        }
        char hex[24];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(fnv1a(cfg)));
        if (cfg.empty() || declared != hex) {
            if (diagnostic)
                *diagnostic = entry.path().string() + ": config hash mismatch";
            return false;
        }
    }
    if (!any && diagnostic) *diagnostic = "no result files in '" + dir + "'";
    return any;
}

// ---- experiment dispatch -------------------------------------------------

namespace detail {

using model::detail::check_keys;

inline double num(const json& p, const char* key) {
    if (!p.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
    if (!p.at(key).is_number()) throw ConfigError(std::string("field '") + key + "' must be numeric");
    return p.at(key).get<double>();
}

inline double num_or(const json& p, const char* key, double dflt) {
    return p.contains(key) ? num(p, key) : dflt;
}

inline std::vector<double> num_list(const json& p, const char* key) {
    if (!p.contains(key) || !p.at(key).is_array())
        throw ConfigError(std::string("field '") + key + "' must be an array");
    return p.at(key).get<std::vector<double>>();
}

inline Coord coord_of(const json& p, const char* key) {
    const auto v = num_list(p, key);
    return {v.at(0), v.size() > 1 ? v[1] : 0.0};
}

inline std::vector<double> logspace(double lo, double hi, int n) {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i)
        out[i] = lo * std::pow(hi / lo, n > 1 ? static_cast<double>(i) / (n - 1) : 0.0);
    return out;
}

inline ResultTable table(const ExperimentConfig& c, std::string name,
                         std::vector<std::string> cols) {
    ResultTable t;
    t.name = std::move(name);
    t.columns = std::move(cols);
    t.config = c.raw;
    return t;
}

inline std::vector<ResultTable> run_criterion(const ExperimentConfig& c) {
    check_keys(c.params, {"L", "E", "eps", "s", "N", "M"}, "criterion params");
    const auto rep = criterion::criterion_eval(
        c.spec, num(c.params, "L"), num(c.params, "E"), num(c.params, "eps"),
        num(c.params, "s"), static_cast<int>(num(c.params, "N")),
        num_or(c.params, "M", 1.0), c.seed, c.workers);
    auto t = table(c, "criterion",
                   {"L", "E", "eps", "s", "N", "b", "b_ci_lo", "b_ci_hi", "M",
                    "gamma", "loc_length", "pass"});
    t.rows.push_back({fmt(rep.L), fmt(rep.E), fmt(rep.eps), fmt(rep.s),
                      fmt(rep.N), fmt(rep.b), fmt(rep.b_ci.lo), fmt(rep.b_ci.hi),
                      fmt(rep.M), fmt(rep.gamma), fmt(rep.loc_length),
                      fmt(rep.pass)});
    return {t};
}

inline std::vector<ResultTable> run_decay(const ExperimentConfig& c) {
    check_keys(c.params, {"E", "eps", "s", "N", "distances"}, "decay params");
    std::vector<std::pair<Coord, Coord>> pairs;
    for (double d : num_list(c.params, "distances"))
        pairs.push_back({{0.0, 0.0}, {d, 0.0}});
    const auto fit = criterion::decay_fit(
        c.spec, {num(c.params, "E"), num(c.params, "eps")}, num(c.params, "s"),
        pairs, static_cast<int>(num(c.params, "N")), c.seed, c.workers);
    auto tm = table(c, "decay_moments", {"dist", "mean", "ci_lo", "ci_hi"});
    for (std::size_t i = 0; i < fit.dist.size(); ++i)
        tm.rows.push_back({fmt(fit.dist[i]), fmt(fit.mean_moment[i]),
                           fmt(fit.ci[i].lo), fmt(fit.ci[i].hi)});
    auto tf = table(c, "decay_fit",
                    {"mu", "mu_se", "intercept", "r2", "significant"});
    tf.rows.push_back({fmt(fit.mu), fmt(fit.mu_se), fmt(fit.intercept),
                       fmt(fit.r2), fmt(fit.significant)});
    return {tm, tf};
}

inline std::vector<ResultTable> run_tails(const ExperimentConfig& c) {
    check_keys(c.params, {"E", "eps", "N", "x", "y", "t_max", "t_min", "t_count"},
               "tails params");
    const auto grid =
        logspace(num(c.params, "t_max"), num(c.params, "t_min"),
                 static_cast<int>(num_or(c.params, "t_count", 24)));
    const auto tp = moments::weak_l1_tail(
        c.spec, {num(c.params, "E"), num(c.params, "eps")},
        coord_of(c.params, "x"), coord_of(c.params, "y"),
        static_cast<int>(num(c.params, "N")), grid, c.seed, c.workers);
    auto t = table(c, "tails", {"t", "value"});
    for (std::size_t i = 0; i < tp.thresholds.size(); ++i)
        t.rows.push_back({fmt(tp.thresholds[i]), fmt(tp.values[i])});
    auto tf = table(c, "tails_fit", {"slope", "slope_se", "constant"});
    tf.rows.push_back({fmt(tp.slope), fmt(tp.slope_se), fmt(tp.constant)});
    return {t, tf};
}

inline std::vector<ResultTable> run_boole(const ExperimentConfig& c) {
    check_keys(c.params, {"J", "t_values"}, "boole params");
    const auto J = num_list(c.params, "J");
    const model::Assembler as(c.spec);
    const auto op = as.build(as.sample(c.seed));
    const spectral::SpectralData sd(op);
    CVector phi(op.size());
    CounterRng rng(c.seed, 0x9911u);
    for (int i = 0; i < op.size(); ++i)
        phi(i) = Complex(rng.uniform(2 * i) - 0.5, rng.uniform(2 * i + 1) - 0.5);
    phi /= phi.norm();
    const auto tp = moments::boole_tail(sd, {J.at(0), J.at(1)}, {0.0, 0.0}, phi,
                                        num_list(c.params, "t_values"));
    auto t = table(c, "boole", {"t", "measure"});
    for (std::size_t i = 0; i < tp.thresholds.size(); ++i)
        t.rows.push_back({fmt(tp.thresholds[i]), fmt(tp.values[i])});
    auto tc = table(c, "boole_check", {"t", "measure_times_t"});
    for (std::size_t i = 0; i < tp.thresholds.size(); ++i)
        tc.rows.push_back(
            {fmt(tp.thresholds[i]), fmt(tp.thresholds[i] * tp.values[i])});
    return {t, tc};
}

inline std::vector<ResultTable> run_bs(const ExperimentConfig& c) {
    check_keys(c.params, {"E", "eps", "xi", "N"}, "bs params");
    const model::Assembler as(c.spec);
    const resolvent::EnergyPoint z(num(c.params, "E"), num(c.params, "eps"));
    const double xi = num(c.params, "xi");
    const int n = static_cast<int>(num(c.params, "N"));
    const int site = as.site_near({0.0, 0.0});
    auto t = table(c, "bs", {"draw", "xi", "residual"});
    for (int k = 0; k < n; ++k) {
        const auto op = as.build(as.sample(CounterRng::child_seed(c.seed, k)));
        std::vector<double> v(as.geometry().total(), 0.0);
        const auto& supp = as.bump_support(site);
        const auto& wgt = as.bump_weights(site);
        for (std::size_t q = 0; q < supp.size(); ++q)
            v[supp[q]] = std::max(c.spec.lambda, 1.0) * wgt[q];
        const auto k0 = birman_schwinger::bs_build(op, v, z);
        const double resid = birman_schwinger::bs_relation_residual(k0, xi, op, v);
        t.rows.push_back({fmt(k), fmt(xi), fmt(resid)});
    }
    return {t};
}

inline std::vector<ResultTable> run_shift(const ExperimentConfig& c) {
    check_keys(c.params, {"E", "s", "t_points"}, "shift params");
    const model::Assembler as(c.spec);
    auto real = as.sample(c.seed);
    const int site = as.site_near({0.0, 0.0});
    real.eta[site] = 0.0;
    const auto op = as.build(real);
    std::vector<double> u(as.geometry().total(), 0.0);
    const auto& supp = as.bump_support(site);
    const auto& wgt = as.bump_weights(site);
    const double amp = std::max(c.spec.lambda, 1.0);
    for (std::size_t q = 0; q < supp.size(); ++q) u[supp[q]] = amp * wgt[q];
    std::vector<double> grid;
    const int pts = static_cast<int>(num_or(c.params, "t_points", 17));
    for (int i = 0; i < pts; ++i) grid.push_back(static_cast<double>(i) / (pts - 1));
    const auto rep = birman_schwinger::spectral_shift(
        CMatrix(op.matrix), u, u, num(c.params, "E"), num(c.params, "s"), grid);
    auto t = table(c, "shift", {"t", "xi"});
    for (std::size_t i = 0; i < rep.t_grid.size(); ++i)
        t.rows.push_back({fmt(rep.t_grid[i]), fmt(rep.xi[i])});
    auto ti = table(c, "shift_integral", {"s", "integral"});
    ti.rows.push_back({fmt(rep.s), fmt(rep.integral)});
    return {t, ti};
}

inline std::vector<ResultTable> run_dos(const ExperimentConfig& c) {
    check_keys(c.params, {"L", "bins", "N", "k_points"}, "dos params");
    const auto rep = spectra::dos_estimate(
        c.spec, num(c.params, "L"), static_cast<int>(num(c.params, "bins")),
        static_cast<int>(num(c.params, "N")), c.spec.bc, c.seed,
        static_cast<int>(num_or(c.params, "k_points", 16)), std::nullopt,
        c.workers);
    auto t = table(c, "dos", {"L", "bin_lo", "bin_hi", "mass"});
    for (std::size_t b = 0; b + 1 <= rep.mass.size(); ++b)
        t.rows.push_back({fmt(rep.L), fmt(rep.edges[b]), fmt(rep.edges[b + 1]),
                          fmt(rep.mass[b])});
    return {t};
}

inline std::vector<ResultTable> run_dynamics(const ExperimentConfig& c) {
    check_keys(c.params, {"J", "distances", "t_max", "t_count"},
               "dynamics params");
    const auto J = num_list(c.params, "J");
    const model::Assembler as(c.spec);
    const spectral::SpectralData sd(as.build(as.sample(c.seed)));
    std::vector<double> t_grid;
    const int tc = static_cast<int>(num_or(c.params, "t_count", 16));
    const double tmax = num_or(c.params, "t_max", 16.0);
    for (int i = 0; i < tc; ++i) t_grid.push_back(tmax * (i + 1) / tc);
    auto t = table(c, "dynamics", {"x", "y", "observable", "value"});
    for (double d : num_list(c.params, "distances")) {
        const Coord x = {0.0, 0.0}, y = {d, 0.0};
        const auto k = correlators::dynamical_kernel(sd, {J.at(0), J.at(1)}, x, y, t_grid);
        t.rows.push_back({fmt(0.0), fmt(d), "sup_t", fmt(k.sup_norm)});
        t.rows.push_back({fmt(0.0), fmt(d), "bound", fmt(k.bound)});
    }
    return {t};
}

inline std::vector<ResultTable> run_hilbert(const ExperimentConfig& c) {
    check_keys(c.params, {"n", "delta", "span", "points", "t_values"},
               "hilbert params");
    const int n = static_cast<int>(num(c.params, "n"));
    CounterRng rng(c.seed, 0x416cu);
    std::uint64_t ctr = 0;
    auto draw = [&] { return 2.0 * rng.uniform(ctr++) - 1.0; };
    CMatrix b(n, n), m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            b(i, j) = Complex(draw(), 0.0);
            m(i, j) = Complex(draw(), draw());
        }
    b = CMatrix((b + b.adjoint()) / 2.0);
    const auto a = hilbert::DissipativeOperator::self_adjoint(b);
    const double span = num(c.params, "span");
    const int pts = static_cast<int>(num(c.params, "points"));
    std::vector<double> vg(pts);
    for (int i = 0; i < pts; ++i) vg[i] = -span + 2.0 * span * i / (pts - 1);
    const auto prof = hilbert::sandwich_profile(a, CMatrix(m.adjoint()), m, vg,
                                                num(c.params, "delta"),
                                                /*keep_matrices=*/false);
    auto t = table(c, "hilbert", {"v", "hs_norm", "im_trace_norm"});
    for (std::size_t i = 0; i < vg.size(); ++i)
        t.rows.push_back({fmt(vg[i]), fmt(prof.hs_norm[i]),
                          fmt(prof.im_trace_norm[i])});
    const auto lev = hilbert::weak_l1_sandwich(prof, num_list(c.params, "t_values"));
    auto tl = table(c, "hilbert_levels", {"t", "level_measure"});
    for (std::size_t i = 0; i < lev.thresholds.size(); ++i)
        tl.rows.push_back({fmt(lev.thresholds[i]), fmt(lev.measures[i])});
    return {t, tl};
}

inline std::vector<ResultTable> run_largedisorder(const ExperimentConfig& c) {
    check_keys(c.params, {"lambdas", "L", "Es", "s", "N"},
               "largedisorder params");
    const auto scan = spectra::large_disorder_scan(
        c.spec, num_list(c.params, "lambdas"), num(c.params, "L"),
        num_list(c.params, "Es"), num(c.params, "s"),
        static_cast<int>(num(c.params, "N")), c.seed, c.workers);
    auto t = table(c, "largedisorder",
                   {"lambda", "E", "mean", "ci_lo", "ci_hi", "b", "pass"});
    for (const auto& row : scan.rows)
        t.rows.push_back({fmt(row.lambda), fmt(row.E), fmt(row.moment),
                          fmt(row.ci.lo), fmt(row.ci.hi), fmt(row.b),
                          fmt(row.pass)});
    return {t};
}

inline std::vector<ResultTable> run_msa(const ExperimentConfig& c) {
    check_keys(c.params, {"Ls", "E", "A", "mu", "s", "t", "N"}, "msa params");
    const auto rep = spectra::msa_bridge(
        c.spec, num_list(c.params, "Ls"), num(c.params, "E"), num(c.params, "A"),
        num(c.params, "mu"), num(c.params, "s"), num(c.params, "t"),
        static_cast<int>(num(c.params, "N")), c.seed, c.workers);
    auto t = table(c, "msa",
                   {"L", "p_bad", "ci_lo", "ci_hi", "combined_bound"});
    for (const auto& row : rep.rows)
        t.rows.push_back({fmt(row.L), fmt(row.p_bad), fmt(row.ci.lo),
                          fmt(row.ci.hi), fmt(row.combined)});
    return {t};
}

inline std::vector<ResultTable> run_holder(const ExperimentConfig& c) {
    check_keys(c.params, {"s", "z", "w", "N", "x", "y"}, "holder params");
    auto as_points = [&](const char* key) {
        std::vector<Complex> out;
        for (const auto& item : c.params.at(key))
            out.emplace_back(item.at(0).get<double>(), item.at(1).get<double>());
        return out;
    };
    const auto scan = moments::holder_scan(
        c.spec, num(c.params, "s"), as_points("z"), as_points("w"),
        coord_of(c.params, "x"), coord_of(c.params, "y"),
        static_cast<int>(num(c.params, "N")), c.seed, c.workers);
    auto t = table(c, "holder", {"z_re", "z_im", "w_re", "w_im", "ratio"});
    for (const auto& row : scan.rows)
        t.rows.push_back({fmt(row.z.real()), fmt(row.z.imag()),
                          fmt(row.w.real()), fmt(row.w.imag()), fmt(row.ratio)});
    return {t};
}

}  // namespace detail

/// Dispatch one experiment; deterministic in (config, seed), independent of
/// the worker count.
inline std::vector<ResultTable> run(const ExperimentConfig& c) {
    try {
        if (c.kind == "criterion") return detail::run_criterion(c);
        if (c.kind == "decay") return detail::run_decay(c);
        if (c.kind == "tails") return detail::run_tails(c);
        if (c.kind == "boole") return detail::run_boole(c);
        if (c.kind == "bs") return detail::run_bs(c);
        if (c.kind == "shift") return detail::run_shift(c);
        if (c.kind == "dos") return detail::run_dos(c);
        if (c.kind == "dynamics") return detail::run_dynamics(c);
        if (c.kind == "hilbert") return detail::run_hilbert(c);
        if (c.kind == "largedisorder") return detail::run_largedisorder(c);
        if (c.kind == "msa") return detail::run_msa(c);
        if (c.kind == "holder") return detail::run_holder(c);
    } catch (const ConfigError&) {
        throw;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad parameter block: ") + e.what());
    }
    throw ConfigError("unknown experiment kind '" + c.kind + "'");
}

/// One run per axis value with derived child seeds; rows tagged with the
/// axis value in a leading column.
inline std::vector<ResultTable> sweep(const ExperimentConfig& base,
                                      const std::string& axis,
                                      const std::vector<double>& values) {
    // locate the axis as a numeric leaf of the config document
    std::vector<std::string> parts;
    std::string token;
    for (char ch : axis) {
        if (ch == '.') {
            parts.push_back(token);
            token.clear();
        } else {
            token += ch;
        }
    }
    parts.push_back(token);

    auto set_leaf = [&](json& doc, double v) {
        json* cur = &doc;
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
            if (!cur->contains(parts[i]))
                throw ConfigError("axis path '" + axis + "' not found");
            cur = &(*cur)[parts[i]];
        }
        if (!cur->contains(parts.back()) || !(*cur)[parts.back()].is_number())
            throw ConfigError("axis '" + axis + "' is not a numeric leaf");
        (*cur)[parts.back()] = v;
    };

    std::string col = axis;
    for (auto& ch : col)
        if (ch == '.') ch = '_';

    std::vector<ResultTable> merged;
    for (std::size_t i = 0; i < values.size(); ++i) {
        json doc = base.raw;
        set_leaf(doc, values[i]);
        doc["seed"] = CounterRng::child_seed(base.seed, i);
        const auto child = parse_config(doc);
        const auto tables = run(child);
        if (merged.empty()) {
            for (const auto& t : tables) {
                ResultTable m;
                m.name = t.name;
                m.columns.push_back(col);
                m.columns.insert(m.columns.end(), t.columns.begin(), t.columns.end());
                m.config = base.raw;
                merged.push_back(m);
            }
        }
        for (std::size_t q = 0; q < tables.size(); ++q)
            for (const auto& row : tables[q].rows) {
                std::vector<std::string> tagged{fmt(values[i])};
                tagged.insert(tagged.end(), row.begin(), row.end());
                merged[q].rows.push_back(tagged);
            }
    }
    if (merged.empty()) {
        // empty sweep still yields schema headers
        json doc = base.raw;
        const auto child = parse_config(doc);
        (void)child;
        ResultTable m;
        m.name = base.kind;
        m.columns = {col};
        m.config = base.raw;
        merged.push_back(m);
    }
    return merged;
}

}  // namespace locmoment::harness
