// Configuration-driven front door.  Every subcommand assembles a canonical
// experiment config (JSON), hands it to the same driver that `run --config`
// uses, prints the manifest JSON to stdout, and optionally writes CSV tables
// next to a manifest file under --out.  Exit codes: 0 all checks pass,
// 1 some check violated, 2 configuration/schema error, 3 numerical blowup.
#include "hypocoerce/jsonio.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

using namespace hypo;

namespace {

constexpr const char* kVersion = "0.1.0";

std::vector<double> split_doubles(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stod(item));
    return out;
}

std::vector<int> split_ints(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stoi(item));
    return out;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::invalid_argument("invalid JSON in '" + path + "': " + e.what());
    }
    return j;
}

void require_keys(const json& j, const std::set<std::string>& required,
                  const std::set<std::string>& optional, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
    for (const auto& k : required)
        if (!j.contains(k)) throw std::invalid_argument(where + " is missing key '" + k + "'");
    for (const auto& [k, v] : j.items())
        if (!required.count(k) && !optional.count(k))
            throw std::invalid_argument(where + " has unknown key '" + k + "'");
}

const std::set<std::string> kModelKeys = {"geometry", "model", "beta", "G", "alpha"};
const std::set<std::string> kSimKeys = {"dt",   "paths",  "seed",   "scheme", "fd_h",
                                        "tangent", "chunk", "salt", "blowup_quota"};

ModelSpec resolve_model(const json& cfg) {
    if (cfg.contains("model")) {
        const json& m = cfg.at("model");
        if (m.is_string()) return model_from_json(load_json_file(m.get<std::string>()));
        return model_from_json(m);
    }
    if (!cfg.contains("geometry"))
        throw std::invalid_argument("config needs either 'model' or 'geometry'");
    json m;
    m["geometry"] = cfg.at("geometry");
    m["beta"] = cfg.value("beta", 1.0);
    if (cfg.contains("G")) m["G"] = cfg.at("G");
    if (cfg.contains("alpha")) m["alpha"] = cfg.at("alpha");
    return model_from_json(m);
}

SemigroupConfig resolve_sim(const json& cfg) {
    SemigroupConfig sc;
    sc.dt = cfg.value("dt", 1e-3);
    sc.n_paths = cfg.value("paths", static_cast<size_t>(10000));
    sc.seed = cfg.value("seed", static_cast<uint64_t>(1));
    sc.scheme = scheme_by_name(cfg.value("scheme", std::string("euler")));
    sc.fd_h = cfg.value("fd_h", 1e-3);
    sc.use_tangent = cfg.value("tangent", false);
    sc.chunk_size = cfg.value("chunk", static_cast<size_t>(1024));
    sc.salt = cfg.value("salt", 0u);
    sc.blowup_quota = cfg.value("blowup_quota", 1e-3);
    return sc;
}

std::vector<double> resolve_grid(const json& cfg) {
    if (!cfg.contains("t_grid")) throw std::invalid_argument("config needs 't_grid'");
    std::vector<double> g = cfg.at("t_grid").get<std::vector<double>>();
    if (g.empty()) throw std::invalid_argument("'t_grid' must not be empty");
    return g;
}

std::vector<double> resolve_x0(const json& cfg, int dim) {
    std::vector<double> x(dim, 0.0);
    if (cfg.contains("x0")) {
        x = cfg.at("x0").get<std::vector<double>>();
        if (static_cast<int>(x.size()) != dim)
            throw std::invalid_argument("'x0' arity does not match the geometry");
    }
    return x;
}

struct CsvTable {
    std::string name;     // file suffix
    std::string columns;  // header row
    std::vector<std::string> rows;
};

struct RunResult {
    json result;
    std::vector<Verdict> verdicts;
    std::vector<CsvTable> tables;
};

std::string fmt(double v) {
    std::ostringstream o;
    o.precision(12);
    o << v;
    return o.str();
}

CsvTable checks_table(const std::vector<BoundCheck>& checks) {
    CsvTable t;
    t.name = "checks";
    t.columns = "t,lhs,lhs_err,rhs,rhs_err,margin_sigma,verdict";
    for (const auto& c : checks)
        t.rows.push_back(fmt(c.t) + "," + fmt(c.lhs.value) + "," + fmt(c.lhs.std_err) + "," +
                         fmt(c.rhs.value) + "," + fmt(c.rhs.std_err) + "," + fmt(c.margin_sigma) +
                         "," + verdict_name(c.verdict));
    return t;
}

void collect(const std::vector<BoundCheck>& checks, RunResult& rr) {
    json arr = json::array();
    for (const auto& c : checks) {
        arr.push_back(to_json(c));
        rr.verdicts.push_back(c.verdict);
    }
    rr.result["checks"] = std::move(arr);
    rr.tables.push_back(checks_table(checks));
}

// ---------------------------------------------------------------- lattice

LatticeParams lattice_params_from(const json& cfg) {
    LatticeParams p;
    int d = cfg.value("d", 1);
    int radius = cfg.value("box", 10);
    p.box = Box::centered(d, radius);
    if (cfg.contains("lambda")) {
        int lr = cfg.at("lambda").get<int>();
        Box lb = Box::centered(d, lr);
        for (size_t i = 0; i < lb.size(); ++i) p.interaction_sites.push_back(lb.site_at(i));
    }
    p.range = cfg.value("range", 1);
    p.site = geometry_by_name(cfg.value("site_geometry", std::string("heisenberg")));
    p.beta = cfg.value("beta", 1.0);
    if (cfg.contains("G")) p.G = mat_from_json(cfg.at("G"));
    if (cfg.contains("stencil")) {
        p.coupling.amplitude = cfg.value("amplitude", 0.0);
        for (const auto& e : cfg.at("stencil")) {
            require_keys(e, {"offset", "weight"}, {}, "stencil entry");
            p.coupling.stencil.emplace_back(e.at("offset").get<std::vector<int>>(),
                                            e.at("weight").get<double>());
        }
    } else {
        p.coupling = CouplingSpec::nearest_neighbor(d, cfg.value("amplitude", 0.0));
    }
    return p;
}

CylinderObservable lattice_observable(const json& cfg, int d) {
    std::vector<int> site(d, 0);
    if (cfg.contains("f_site")) site = cfg.at("f_site").get<std::vector<int>>();
    int comp = cfg.value("f_comp", 0);
    return CylinderObservable::coordinate(site, comp);
}

// deterministic probe set: probe 0 is the zero configuration, the rest draw
// site coordinates uniformly from [-scale, scale]
std::vector<Configuration> make_probes(const LatticeModel& m, size_t count, double scale,
                                       uint64_t seed) {
    std::vector<Configuration> probes;
    probes.emplace_back();
    for (size_t p = 1; p < count; ++p) {
        Configuration c;
        for (size_t s = 0; s < m.n_sites(); ++s) {
            std::vector<double> v(m.site_dim());
            for (int q = 0; q < m.site_dim(); ++q)
                v[q] = scale * (2.0 * uniform01(seed, p, s, static_cast<uint64_t>(q)) - 1.0);
            c.values[m.box.site_at(s)] = std::move(v);
        }
        probes.push_back(std::move(c));
    }
    return probes;
}

const std::set<std::string> kLatticeKeys = {"d",        "box",     "lambda",       "lambda2",
                                            "range",    "site_geometry", "beta",  "G",
                                            "amplitude", "stencil", "f_site",      "f_comp",
                                            "t",        "t_grid",  "probes",      "probe_scale",
                                            "perturb_sites", "perturb", "report_max_nk"};

// ------------------------------------------------------------ experiments

RunResult experiment_geometry(const json& cfg) {
    require_keys(cfg, {"experiment"}, {"geometry", "file", "out"}, "config");
    RunResult rr;
    Geometry g;
    if (cfg.contains("file"))
        g = geometry_from_json(load_json_file(cfg.at("file").get<std::string>()));
    else
        g = geometry_by_name(cfg.value("geometry", std::string("heisenberg")));
    rr.result = geometry_to_json(g);
    return rr;
}

RunResult experiment_constants(const json& cfg) {
    std::set<std::string> opt = kModelKeys;
    opt.insert({"q", "optimal", "x", "out"});
    require_keys(cfg, {"experiment"}, opt, "config");
    ModelSpec m = resolve_model(cfg);
    RunResult rr;
    KappaReport kr = cfg.value("optimal", false) ? kappa_optimal(m) : kappa(m);
    rr.result["kappa"] = to_json(kr);
    if (cfg.contains("q"))
        rr.result["lq"] = to_json(kappa_q(m.geom, m.beta, cfg.at("q").get<double>()));
    if (cfg.contains("x")) {
        PointwiseModel pm = PointwiseModel::from_model(m);
        std::vector<double> x = cfg.at("x").get<std::vector<double>>();
        if (static_cast<int>(x.size()) != m.geom.N)
            throw std::invalid_argument("'x' arity does not match the geometry");
        rr.result["pointwise"] = to_json(kappa_pointwise(pm, x));
    }
    return rr;
}

RunResult experiment_simulate(const json& cfg) {
    std::set<std::string> opt = kModelKeys;
    opt.insert(kSimKeys.begin(), kSimKeys.end());
    opt.insert({"x0", "t", "save_trajectories", "dump_stride", "out"});
    require_keys(cfg, {"experiment", "t"}, opt, "config");

    ModelSpec m = resolve_model(cfg);
    SdeSystem sys = assemble_sde(m);
    SemigroupConfig sc = resolve_sim(cfg);
    double t = cfg.at("t").get<double>();
    if (!(t > 0)) throw std::invalid_argument("'t' must be positive");
    std::vector<double> x0 = resolve_x0(cfg, m.geom.N);

    bool dump = cfg.contains("save_trajectories");
    size_t stride = cfg.value("dump_stride", static_cast<size_t>(1));
    if (stride < 1) throw std::invalid_argument("'dump_stride' must be at least 1");

    std::vector<double> grid;
    size_t last = static_cast<size_t>(std::llround(t / sc.dt));
    if (dump) {
        for (size_t s = 0; s <= last; s += stride) grid.push_back(static_cast<double>(s) * sc.dt);
        if (grid.back() < static_cast<double>(last) * sc.dt)
            grid.push_back(static_cast<double>(last) * sc.dt);
        double cells = static_cast<double>(sc.n_paths) * static_cast<double>(grid.size()) *
                       (m.geom.N + 1);
        if (cells > 5e7)
            throw std::invalid_argument("trajectory dump too large; reduce paths or raise dump_stride");
    } else {
        grid = {t};
    }

    size_t nq = static_cast<size_t>(m.geom.N) + 1;
    auto res = run_ensemble(
        sys, sc.ensemble(), {x0}, {}, grid, nq,
        [&](size_t, size_t, const BundleView& v, double* out) {
            for (int q = 0; q < v.dim; ++q) out[q] = v.state(0)[q];
            out[v.dim] = 1.0;
        },
        dump);
    if (static_cast<double>(res.blown_paths) > sc.blowup_quota * static_cast<double>(res.n_paths))
        throw BlowupError(res.first_blown_path, res.first_blown_step, res.blown_paths, res.n_paths);

    RunResult rr;
    size_t gl = res.times.size() - 1;
    json coords = json::array();
    for (int q = 0; q < m.geom.N; ++q)
        coords.push_back(json{{"mean", res.mean(gl, q)}, {"std_err", res.std_err(gl, q)}});
    rr.result["t"] = res.times[gl];
    rr.result["coordinates"] = std::move(coords);
    rr.result["blown_paths"] = res.blown_paths;

    if (dump) {
        CsvTable tab;
        tab.name = "trajectories";
        std::string cols = "path_id,step,t";
        for (int q = 1; q <= m.geom.N; ++q) cols += ",x_" + std::to_string(q);
        tab.columns = cols;
        for (size_t p = 0; p < sc.n_paths; ++p)
            for (size_t g = 0; g < res.times.size(); ++g) {
                const double* row = res.raw.data() + (p * res.times.size() + g) * nq;
                if (row[m.geom.N] != 1.0) continue;
                std::string line = std::to_string(p) + "," +
                                   std::to_string(static_cast<size_t>(
                                       std::llround(res.times[g] / sc.dt))) +
                                   "," + fmt(res.times[g]);
                for (int q = 0; q < m.geom.N; ++q) line += "," + fmt(row[q]);
                tab.rows.push_back(std::move(line));
            }
        rr.tables.push_back(std::move(tab));
        rr.result["trajectory_file"] = cfg.at("save_trajectories").get<std::string>();
    }
    return rr;
}

RunResult experiment_check(const json& cfg, const std::string& kind) {
    std::set<std::string> opt = kModelKeys;
    opt.insert(kSimKeys.begin(), kSimKeys.end());
    opt.insert({"observable", "x0", "t_grid", "optimal", "out"});
    std::set<std::string> req = {"experiment"};
    if (kind == "lq") opt.insert("q");
    if (kind == "expmoment") opt.insert({"burn_in", "window", "thin", "deltas"});

    require_keys(cfg, req, opt, "config");
    ModelSpec m = resolve_model(cfg);
    SdeSystem sys = assemble_sde(m);
    SemigroupConfig sc = resolve_sim(cfg);
    std::vector<double> x0 = resolve_x0(cfg, m.geom.N);

    RunResult rr;
    if (kind == "lyapunov") {
        LyapunovReport rep = check_lyapunov(m, sys, x0, resolve_grid(cfg), sc);
        rr.result = to_json(rep);
        for (const auto& c : rep.checks) rr.verdicts.push_back(c.verdict);
        rr.tables.push_back(checks_table(rep.checks));
        return rr;
    }

    if (!cfg.contains("observable")) throw std::invalid_argument("config needs 'observable'");
    Observable f = parse_observable(cfg.at("observable").get<std::string>(), m.geom.N);

    if (kind == "grad" || kind == "poincare") {
        KappaReport rate = cfg.value("optimal", false) ? kappa_optimal(m) : kappa(m);
        auto checks = kind == "grad"
                          ? check_gradient_bound(m, sys, f, x0, resolve_grid(cfg), sc, rate)
                          : check_poincare(m, sys, f, x0, resolve_grid(cfg), sc, rate);
        rr.result["rate"] = to_json(rate);
        collect(checks, rr);
        return rr;
    }
    if (kind == "lq") {
        double q = cfg.value("q", 2.0);
        auto checks = check_lq_bound(m, sys, f, x0, resolve_grid(cfg), q, sc);
        rr.result["lq"] = to_json(kappa_q(m.geom, m.beta, q));
        collect(checks, rr);
        return rr;
    }
    if (kind == "expmoment") {
        double burn = cfg.value("burn_in", 5.0);
        double window = cfg.value("window", 5.0);
        double thin = cfg.value("thin", 0.5);
        std::vector<double> deltas = cfg.contains("deltas")
                                         ? cfg.at("deltas").get<std::vector<double>>()
                                         : std::vector<double>{0.1, 0.2, 0.3, 0.4};
        KappaReport rate = cfg.value("optimal", false) ? kappa_optimal(m) : kappa(m);
        InvariantSamples samples = empirical_invariant_measure(m, sys, x0, burn, window, thin, sc);
        ExpMomentReport rep = check_exp_moment(m, samples, f, deltas, rate);
        rr.result = to_json(rep);
        rr.result["n_states"] = samples.n_states;
        rr.verdicts.push_back(rep.verdict);
        CsvTable tab;
        tab.name = "excess";
        tab.columns = "delta,excess,std_err";
        for (size_t i = 0; i < rep.deltas.size(); ++i)
            tab.rows.push_back(fmt(rep.deltas[i]) + "," + fmt(rep.excess[i]) + "," +
                               fmt(rep.excess_se[i]));
        rr.tables.push_back(std::move(tab));
        return rr;
    }
    throw std::invalid_argument("unknown check kind '" + kind + "'");
}

RunResult experiment_invariant(const json& cfg) {
    std::set<std::string> opt = kModelKeys;
    opt.insert(kSimKeys.begin(), kSimKeys.end());
    opt.insert({"x0", "burn_in", "window", "thin", "out"});
    require_keys(cfg, {"experiment"}, opt, "config");
    ModelSpec m = resolve_model(cfg);
    SdeSystem sys = assemble_sde(m);
    SemigroupConfig sc = resolve_sim(cfg);
    std::vector<double> x0 = resolve_x0(cfg, m.geom.N);
    double burn = cfg.value("burn_in", 5.0);
    double window = cfg.value("window", 5.0);
    double thin = cfg.value("thin", 0.5);

    InvariantSamples s = empirical_invariant_measure(m, sys, x0, burn, window, thin, sc);
    RunResult rr;
    rr.result["n_states"] = s.n_states;
    json mean = json::array(), sd = json::array();
    for (int q = 0; q < s.dim; ++q) {
        MomentStats ms;
        for (size_t i = 0; i < s.n_states; ++i) {
            double v = s.state(i)[q];
            ms.n += 1;
            ms.sum += v;
            ms.sum_sq += v * v;
        }
        mean.push_back(ms.mean());
        sd.push_back(std::sqrt(std::max(ms.variance(), 0.0)));
    }
    rr.result["mean"] = std::move(mean);
    rr.result["stddev"] = std::move(sd);

    CsvTable tab;
    tab.name = "states";
    std::string cols;
    for (int q = 1; q <= s.dim; ++q) cols += (q > 1 ? "," : "") + std::string("x_") + std::to_string(q);
    tab.columns = cols;
    for (size_t i = 0; i < s.n_states; ++i) {
        std::string line;
        for (int q = 0; q < s.dim; ++q) line += (q ? "," : "") + fmt(s.state(i)[q]);
        tab.rows.push_back(std::move(line));
    }
    rr.tables.push_back(std::move(tab));
    return rr;
}

RunResult experiment_lattice(const json& cfg, const std::string& kind) {
    std::set<std::string> opt = kLatticeKeys;
    opt.insert(kSimKeys.begin(), kSimKeys.end());
    opt.insert("out");
    require_keys(cfg, {"experiment"}, opt, "config");

    LatticeParams p = lattice_params_from(cfg);
    RunResult rr;

    if (kind == "constants") {
        LatticeModel m = build_lattice(p);
        rr.result = to_json(lattice_constants(m));
        return rr;
    }

    LatticeModel m = build_lattice(p);
    LatticeSystem sys(m);
    SemigroupConfig sc = resolve_sim(cfg);
    CylinderObservable f = lattice_observable(cfg, m.dims());

    if (kind == "speed") {
        double t = cfg.value("t", 0.5);
        auto probes = make_probes(m, cfg.value("probes", static_cast<size_t>(1)),
                                  cfg.value("probe_scale", 1.0), sc.seed ^ 0x9e3779b9ULL);
        std::vector<std::vector<int>> report;
        int max_nk = cfg.value("report_max_nk", 8);
        auto loc = f.localization();
        for (size_t i = 0; i < m.n_sites(); ++i) {
            auto s = m.box.site_at(i);
            int d = dist_to_set(s, loc);
            if (d >= 1 && d / std::max(m.range, 1) <= max_nk) report.push_back(s);
        }
        SpeedReport rep = finite_speed_profile(m, sys, f, t, probes, sc, report);
        rr.result = to_json(rep);
        CsvTable tab;
        tab.name = "profile";
        tab.columns = "site,n_k,gamma,std_err";
        for (const auto& row : rep.rows) {
            std::string site;
            for (size_t i = 0; i < row.site.size(); ++i)
                site += (i ? ";" : "") + std::to_string(row.site[i]);
            tab.rows.push_back(site + "," + std::to_string(row.n_k) + "," + fmt(row.gamma) + "," +
                               fmt(row.gamma_se));
        }
        rr.tables.push_back(std::move(tab));
        return rr;
    }

    if (kind == "cauchy") {
        if (!cfg.contains("lambda2")) throw std::invalid_argument("config needs 'lambda2'");
        LatticeParams p2 = p;
        p2.interaction_sites.clear();
        Box l2 = Box::centered(m.dims(), cfg.at("lambda2").get<int>());
        for (size_t i = 0; i < l2.size(); ++i) p2.interaction_sites.push_back(l2.site_at(i));
        LatticeModel m2 = build_lattice(p2);
        double t = cfg.value("t", 0.5);
        auto probes = make_probes(m, cfg.value("probes", static_cast<size_t>(1)),
                                  cfg.value("probe_scale", 1.0), sc.seed ^ 0x9e3779b9ULL);
        CauchyReport rep = volume_cauchy(m, m2, f, t, probes, sc);
        rr.result = to_json(rep);
        CsvTable tab;
        tab.name = "cauchy";
        tab.columns = "probe,diff,std_err,n";
        for (const auto& row : rep.rows)
            tab.rows.push_back(std::to_string(row.probe) + "," + fmt(row.diff) + "," + fmt(row.se) +
                               "," + std::to_string(row.n));
        rr.tables.push_back(std::move(tab));
        return rr;
    }

    if (kind == "ergodicity") {
        Configuration omega, omega_tilde;
        double shift = cfg.value("perturb", 1.0);
        std::vector<std::vector<int>> psites;
        if (cfg.contains("perturb_sites"))
            for (const auto& s : cfg.at("perturb_sites")) psites.push_back(s.get<std::vector<int>>());
        else
            psites.push_back(std::vector<int>(m.dims(), 0));
        for (const auto& s : psites) {
            std::vector<double> v(m.site_dim(), 0.0);
            v[0] = shift;
            omega_tilde.values[s] = std::move(v);
        }
        ErgodicityReport rep = ergodicity_decay(m, sys, f, omega, omega_tilde, resolve_grid(cfg), sc);
        rr.result = to_json(rep);
        CsvTable tab;
        tab.name = "decay";
        tab.columns = "t,diff,std_err,n_paths";
        for (const auto& r : rep.diff)
            tab.rows.push_back(fmt(r.time) + "," + fmt(r.value) + "," + fmt(r.std_err) + "," +
                               std::to_string(r.n_paths));
        rr.tables.push_back(std::move(tab));
        return rr;
    }
    throw std::invalid_argument("unknown lattice experiment '" + kind + "'");
}

RunResult run_experiment(const json& cfg) {
    if (!cfg.contains("experiment")) throw std::invalid_argument("config needs 'experiment'");
    std::string kind = cfg.at("experiment").get<std::string>();
    if (kind == "geometry") return experiment_geometry(cfg);
    if (kind == "constants") return experiment_constants(cfg);
    if (kind == "simulate") return experiment_simulate(cfg);
    if (kind.rfind("check_", 0) == 0) return experiment_check(cfg, kind.substr(6));
    if (kind == "invariant") return experiment_invariant(cfg);
    if (kind.rfind("lattice_", 0) == 0) return experiment_lattice(cfg, kind.substr(8));
    throw std::invalid_argument("unknown experiment '" + kind + "'");
}

int finish(const json& cfg, RunResult rr, double wall_ms) {
    json manifest;
    manifest["version"] = kVersion;
    manifest["config"] = cfg;
    manifest["config_hash"] = config_hash(cfg);
    manifest["seed"] = cfg.value("seed", static_cast<uint64_t>(1));
    manifest["wall_ms"] = wall_ms;
    manifest["result"] = rr.result;
    json verdicts = json::array();
    bool violated = false;
    for (Verdict v : rr.verdicts) {
        verdicts.push_back(verdict_name(v));
        if (v == Verdict::violated) violated = true;
    }
    manifest["verdicts"] = std::move(verdicts);

    std::string header =
        "# seed=" + std::to_string(cfg.value("seed", static_cast<uint64_t>(1))) +
        " config=" + config_hash(cfg);
    if (cfg.contains("out")) {
        std::string prefix = cfg.at("out").get<std::string>();
        std::ofstream mf(prefix + ".manifest.json");
        if (!mf) throw std::invalid_argument("cannot write '" + prefix + ".manifest.json'");
        mf << manifest.dump(2) << "\n";
        for (const auto& t : rr.tables) {
            std::ofstream cf(prefix + "." + t.name + ".csv");
            if (!cf) throw std::invalid_argument("cannot write CSV for table '" + t.name + "'");
            cf << header << "\n" << t.columns << "\n";
            for (const auto& r : t.rows) cf << r << "\n";
        }
    }
    if (cfg.contains("save_trajectories"))
        for (const auto& t : rr.tables) {
            if (t.name != "trajectories") continue;
            std::string path = cfg.at("save_trajectories").get<std::string>();
            std::ofstream cf(path);
            if (!cf) throw std::invalid_argument("cannot write '" + path + "'");
            cf << header << "\n" << t.columns << "\n";
            for (const auto& r : t.rows) cf << r << "\n";
        }
    std::cout << manifest.dump(2) << std::endl;
    return violated ? 1 : 0;
}

int dispatch(const json& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    RunResult rr = run_experiment(cfg);
    double wall =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return finish(cfg, std::move(rr), wall);
}

// shared CLI flags collected into the config object
struct CommonFlags {
    std::string geometry, model, G, alpha, alpha_amps, x0, scheme;
    double beta = NAN, dt = NAN, fd_h = NAN;
    size_t paths = 0, chunk = 0;
    uint64_t seed = UINT64_MAX;
    uint32_t salt = 0;
    bool tangent = false, optimal = false;
    std::string out;

    void attach(CLI::App* app, bool with_model = true, bool with_sim = true) {
        if (with_model) {
            app->add_option("--geometry", geometry, "catalog geometry name");
            app->add_option("--model", model, "model JSON file");
            app->add_option("--beta", beta, "friction strength");
            app->add_option("--G", G, "coupling matrix as JSON rows");
            app->add_option("--alpha", alpha, "alpha preset (zero|tanh_first)");
            app->add_option("--alpha-amplitudes", alpha_amps, "per-generator amplitudes (csv)");
        }
        if (with_sim) {
            app->add_option("--dt", dt, "time step");
            app->add_option("--paths", paths, "Monte Carlo paths");
            app->add_option("--seed", seed, "noise stream seed");
            app->add_option("--salt", salt, "extra stream separator");
            app->add_option("--scheme", scheme, "integrator (euler|heun)");
            app->add_option("--fd-h", fd_h, "finite-difference displacement");
            app->add_flag("--tangent", tangent, "first-variation derivatives instead of FD");
            app->add_option("--chunk", chunk, "reduction chunk size");
        }
        app->add_flag("--optimal", optimal, "use the optimal-pairing rate");
        app->add_option("--out", out, "output file prefix (manifest + CSV tables)");
    }

    void fill(json& cfg) const {
        if (!model.empty()) cfg["model"] = model;
        if (!geometry.empty()) cfg["geometry"] = geometry;
        if (!std::isnan(beta)) cfg["beta"] = beta;
        if (!G.empty()) cfg["G"] = json::parse(G);
        if (!alpha.empty()) {
            json a;
            a["preset"] = alpha;
            if (!alpha_amps.empty()) a["amplitudes"] = split_doubles(alpha_amps);
            cfg["alpha"] = a;
        }
        if (!std::isnan(dt)) cfg["dt"] = dt;
        if (paths) cfg["paths"] = paths;
        if (seed != UINT64_MAX) cfg["seed"] = seed;
        if (salt) cfg["salt"] = salt;
        if (!scheme.empty()) cfg["scheme"] = scheme;
        if (!std::isnan(fd_h)) cfg["fd_h"] = fd_h;
        if (tangent) cfg["tangent"] = true;
        if (chunk) cfg["chunk"] = chunk;
        if (optimal) cfg["optimal"] = true;
        if (!out.empty()) cfg["out"] = out;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"explicit hypocoercive decay rates and their Monte Carlo verification"};
    app.require_subcommand(1);

    // geometry show <name> | geometry import <file>
    auto* geo = app.add_subcommand("geometry", "print or import a geometry record");
    std::string geo_action = "show", geo_name = "heisenberg";
    geo->add_option("action", geo_action, "show|import")->required();
    geo->add_option("name", geo_name, "catalog name or JSON file");
    std::string geo_out;
    geo->add_option("--out", geo_out, "output file prefix");

    auto* cons = app.add_subcommand("constants", "decay constants for a model");
    CommonFlags cons_flags;
    cons_flags.attach(cons, /*with_model=*/true, /*with_sim=*/false);
    double cons_q = NAN;
    std::string cons_x;
    cons->add_option("--q", cons_q, "also report the L^q rate");
    cons->add_option("--x", cons_x, "also report the pointwise rate at this point (csv)");

    auto* sim = app.add_subcommand("simulate", "integrate the model SDE");
    CommonFlags sim_flags;
    sim_flags.attach(sim);
    double sim_t = NAN;
    std::string sim_x0, sim_traj;
    size_t sim_stride = 0;
    sim->add_option("--t", sim_t, "final time")->required();
    sim->add_option("--x0", sim_x0, "start point (csv)");
    sim->add_option("--save-trajectories", sim_traj, "CSV dump path");
    sim->add_option("--dump-stride", sim_stride, "keep every k-th step in the dump");

    auto* check = app.add_subcommand("check", "verify a decay inequality");
    check->require_subcommand(1);
    struct CheckCmd {
        CLI::App* sub;
        CommonFlags flags;
        std::string observable, x0, grid;
        double q = NAN;
        double burn = NAN, window = NAN, thin = NAN;
        std::string deltas;
    };
    std::vector<std::string> check_kinds = {"grad", "lq", "lyapunov", "poincare", "expmoment"};
    std::vector<CheckCmd> checks(check_kinds.size());
    for (size_t i = 0; i < check_kinds.size(); ++i) {
        CheckCmd& c = checks[i];
        c.sub = check->add_subcommand(check_kinds[i]);
        c.flags.attach(c.sub);
        c.sub->add_option("--x", c.x0, "base point (csv)");
        if (check_kinds[i] != "lyapunov")
            c.sub->add_option("--observable", c.observable, "observable expression")->required();
        if (check_kinds[i] != "expmoment")
            c.sub->add_option("--t", c.grid, "time grid (csv)")->required();
        if (check_kinds[i] == "lq") c.sub->add_option("--q", c.q, "exponent q > 1")->required();
        if (check_kinds[i] == "expmoment") {
            c.sub->add_option("--burn-in", c.burn, "equilibration time");
            c.sub->add_option("--window", c.window, "sampling window");
            c.sub->add_option("--thin", c.thin, "thinning interval");
            c.sub->add_option("--deltas", c.deltas, "exponent grid (csv)");
        }
    }

    auto* inv = app.add_subcommand("invariant", "sample the long-run distribution");
    CommonFlags inv_flags;
    inv_flags.attach(inv);
    std::string inv_x0;
    double inv_burn = NAN, inv_window = NAN, inv_thin = NAN;
    inv->add_option("--x", inv_x0, "start point (csv)");
    inv->add_option("--burn-in", inv_burn, "equilibration time");
    inv->add_option("--window", inv_window, "sampling window");
    inv->add_option("--thin", inv_thin, "thinning interval");

    auto* lat = app.add_subcommand("lattice", "coupled site-copy experiments");
    lat->require_subcommand(1);
    struct LatCmd {
        CLI::App* sub;
        CommonFlags flags;
        int d = 1, box = 10, lambda = INT32_MIN, lambda2 = INT32_MIN, range = 1, max_nk = 8;
        double amplitude = 0, t = NAN, probe_scale = 1.0, perturb = NAN;
        std::string stencil, site_geometry, f_site, grid, perturb_sites;
        size_t probes = 0;
        int f_comp = 0;
    };
    std::vector<std::string> lat_kinds = {"constants", "speed", "cauchy", "ergodicity"};
    std::vector<LatCmd> lats(lat_kinds.size());
    for (size_t i = 0; i < lat_kinds.size(); ++i) {
        LatCmd& c = lats[i];
        c.sub = lat->add_subcommand(lat_kinds[i]);
        c.flags.attach(c.sub, /*with_model=*/false);
        c.sub->add_option("--d", c.d, "lattice dimension");
        c.sub->add_option("--box", c.box, "simulation box radius");
        c.sub->add_option("--lambda", c.lambda, "interaction set radius (default: whole box)");
        c.sub->add_option("--range", c.range, "interaction range R");
        c.sub->add_option("--amplitude", c.amplitude, "coupling amplitude a");
        c.sub->add_option("--stencil", c.stencil, "stencil JSON [{offset, weight}...]");
        c.sub->add_option("--site-geometry", c.site_geometry, "catalog geometry per site");
        c.sub->add_option("--beta", c.flags.beta, "friction strength");
        if (lat_kinds[i] != "constants") {
            c.sub->add_option("--f-site", c.f_site, "observed site (csv)");
            c.sub->add_option("--f-comp", c.f_comp, "observed coordinate");
            c.sub->add_option("--probes", c.probes, "probe configurations");
            c.sub->add_option("--probe-scale", c.probe_scale, "probe coordinate range");
        }
        if (lat_kinds[i] == "speed" || lat_kinds[i] == "cauchy")
            c.sub->add_option("--t", c.t, "observation time");
        if (lat_kinds[i] == "speed")
            c.sub->add_option("--report-max-nk", c.max_nk, "largest reported N_k");
        if (lat_kinds[i] == "cauchy")
            c.sub->add_option("--lambda2", c.lambda2, "larger interaction set radius")->required();
        if (lat_kinds[i] == "ergodicity") {
            c.sub->add_option("--t", c.grid, "time grid (csv)")->required();
            c.sub->add_option("--perturb", c.perturb, "first-coordinate shift");
            c.sub->add_option("--perturb-sites", c.perturb_sites,
                              "perturbed sites (semicolon-separated csv tuples)");
        }
    }

    auto* runc = app.add_subcommand("run", "execute an experiment config file");
    std::string run_config;
    runc->add_option("--config", run_config, "experiment JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (geo->parsed()) {
            json cfg;
            cfg["experiment"] = "geometry";
            if (geo_action == "show")
                cfg["geometry"] = geo_name;
            else if (geo_action == "import")
                cfg["file"] = geo_name;
            else
                throw std::invalid_argument("geometry action must be 'show' or 'import'");
            if (!geo_out.empty()) cfg["out"] = geo_out;
            return dispatch(cfg);
        }
        if (cons->parsed()) {
            json cfg;
            cfg["experiment"] = "constants";
            cons_flags.fill(cfg);
            if (!std::isnan(cons_q)) cfg["q"] = cons_q;
            if (!cons_x.empty()) cfg["x"] = split_doubles(cons_x);
            return dispatch(cfg);
        }
        if (sim->parsed()) {
            json cfg;
            cfg["experiment"] = "simulate";
            sim_flags.fill(cfg);
            cfg["t"] = sim_t;
            if (!sim_x0.empty()) cfg["x0"] = split_doubles(sim_x0);
            if (!sim_traj.empty()) cfg["save_trajectories"] = sim_traj;
            if (sim_stride) cfg["dump_stride"] = sim_stride;
            return dispatch(cfg);
        }
        for (size_t i = 0; i < checks.size(); ++i) {
            if (!checks[i].sub->parsed()) continue;
            json cfg;
            cfg["experiment"] = "check_" + check_kinds[i];
            checks[i].flags.fill(cfg);
            if (!checks[i].observable.empty()) cfg["observable"] = checks[i].observable;
            if (!checks[i].x0.empty()) cfg["x0"] = split_doubles(checks[i].x0);
            if (!checks[i].grid.empty()) cfg["t_grid"] = split_doubles(checks[i].grid);
            if (!std::isnan(checks[i].q)) cfg["q"] = checks[i].q;
            if (!std::isnan(checks[i].burn)) cfg["burn_in"] = checks[i].burn;
            if (!std::isnan(checks[i].window)) cfg["window"] = checks[i].window;
            if (!std::isnan(checks[i].thin)) cfg["thin"] = checks[i].thin;
            if (!checks[i].deltas.empty()) cfg["deltas"] = split_doubles(checks[i].deltas);
            return dispatch(cfg);
        }
        if (inv->parsed()) {
            json cfg;
            cfg["experiment"] = "invariant";
            inv_flags.fill(cfg);
            if (!inv_x0.empty()) cfg["x0"] = split_doubles(inv_x0);
            if (!std::isnan(inv_burn)) cfg["burn_in"] = inv_burn;
            if (!std::isnan(inv_window)) cfg["window"] = inv_window;
            if (!std::isnan(inv_thin)) cfg["thin"] = inv_thin;
            return dispatch(cfg);
        }
        for (size_t i = 0; i < lats.size(); ++i) {
            if (!lats[i].sub->parsed()) continue;
            LatCmd& c = lats[i];
            json cfg;
            cfg["experiment"] = "lattice_" + lat_kinds[i];
            c.flags.fill(cfg);
            cfg["d"] = c.d;
            cfg["box"] = c.box;
            if (c.lambda != INT32_MIN) cfg["lambda"] = c.lambda;
            if (c.lambda2 != INT32_MIN) cfg["lambda2"] = c.lambda2;
            cfg["range"] = c.range;
            cfg["amplitude"] = c.amplitude;
            if (!c.stencil.empty()) cfg["stencil"] = json::parse(c.stencil);
            if (!c.site_geometry.empty()) cfg["site_geometry"] = c.site_geometry;
            if (!c.f_site.empty()) cfg["f_site"] = split_ints(c.f_site);
            if (c.f_comp) cfg["f_comp"] = c.f_comp;
            if (!std::isnan(c.t)) cfg["t"] = c.t;
            if (!c.grid.empty()) cfg["t_grid"] = split_doubles(c.grid);
            if (c.probes) cfg["probes"] = c.probes;
            if (c.probe_scale != 1.0) cfg["probe_scale"] = c.probe_scale;
            if (lat_kinds[i] == "speed") cfg["report_max_nk"] = c.max_nk;
            if (!std::isnan(c.perturb)) cfg["perturb"] = c.perturb;
            if (!c.perturb_sites.empty()) {
                json sites = json::array();
                std::stringstream ss(c.perturb_sites);
                std::string tuple;
                while (std::getline(ss, tuple, ';'))
                    if (!tuple.empty()) sites.push_back(split_ints(tuple));
                cfg["perturb_sites"] = std::move(sites);
            }
            return dispatch(cfg);
        }
        if (runc->parsed()) {
            json cfg = load_json_file(run_config);
            return dispatch(cfg);
        }
        throw std::invalid_argument("no subcommand selected");
    } catch (const BlowupError& e) {
        std::cerr << "blowup: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
