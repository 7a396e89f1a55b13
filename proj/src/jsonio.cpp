#include "hypocoerce/jsonio.hpp"

#include <sstream>

namespace hypo {

json poly_to_json(const Poly& p) {
    json terms = json::array();
    for (const auto& [mono, coef] : p.terms()) {
        json t;
        t["exponents"] = mono;
        t["num"] = coef.num();
        t["den"] = coef.den();
        terms.push_back(std::move(t));
    }
    return terms;
}

Poly poly_from_json(const json& j, int n_vars) {
    if (!j.is_array()) throw std::invalid_argument("polynomial record must be an array of terms");
    Poly p(n_vars);
    for (const auto& t : j) {
        std::vector<int> mono = t.at("exponents").get<std::vector<int>>();
        if (static_cast<int>(mono.size()) != n_vars)
            throw std::invalid_argument("term exponent arity mismatch");
        Rational c(t.at("num").get<int64_t>(), t.at("den").get<int64_t>());
        p.set_coeff(mono, p.coeff(mono) + c);
    }
    return p;
}

json field_to_json(const VectorField& f) {
    json comps = json::array();
    for (const auto& c : f.comp) comps.push_back(poly_to_json(c));
    return comps;
}

VectorField field_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw std::invalid_argument("vector field record must be a nonempty array");
    int dim = static_cast<int>(j.size());
    VectorField f(dim);
    for (int p = 0; p < dim; ++p) f.comp[p] = poly_from_json(j[p], dim);
    return f;
}

json geometry_to_json(const Geometry& g) {
    json j;
    j["name"] = g.name;
    j["N"] = g.N;
    j["m"] = g.m;
    j["n"] = g.n;
    json fields = json::array();
    for (const auto& z : g.Z) fields.push_back(field_to_json(z));
    j["Z"] = std::move(fields);
    j["D"] = field_to_json(g.D);
    json lam = json::array();
    for (const auto& l : g.lambda) {
        json e;
        e["num"] = l.num();
        e["den"] = l.den();
        lam.push_back(std::move(e));
    }
    j["lambda"] = std::move(lam);
    json c = json::array();
    for (int k = 0; k < g.n; ++k)
        for (int jj = 0; jj < g.m; ++jj)
            for (int l = 0; l < g.n; ++l) {
                Rational v = g.c.at(k, jj, l);
                if (v == Rational(0)) continue;
                json e;
                e["k"] = k + 1;
                e["j"] = jj + 1;
                e["l"] = l + 1;
                e["num"] = v.num();
                e["den"] = v.den();
                c.push_back(std::move(e));
            }
    j["c"] = std::move(c);
    return j;
}

Geometry geometry_from_json(const json& j) {
    Geometry g;
    g.name = j.at("name").get<std::string>();
    g.N = j.at("N").get<int>();
    g.m = j.at("m").get<int>();
    g.n = j.at("n").get<int>();
    if (g.N < 1 || g.m < 1 || g.n < g.m) throw std::invalid_argument("inconsistent geometry shape");
    for (const auto& f : j.at("Z")) g.Z.push_back(field_from_json(f));
    if (static_cast<int>(g.Z.size()) != g.n) throw std::invalid_argument("frame size mismatch");
    g.D = field_from_json(j.at("D"));
    for (const auto& e : j.at("lambda"))
        g.lambda.emplace_back(e.at("num").get<int64_t>(), e.at("den").get<int64_t>());
    if (static_cast<int>(g.lambda.size()) != g.n)
        throw std::invalid_argument("dilation eigenvalue count mismatch");
    g.c = StructureTensor(g.n, g.m);
    for (const auto& e : j.at("c")) {
        int k = e.at("k").get<int>(), jj = e.at("j").get<int>(), l = e.at("l").get<int>();
        if (k < 1 || k > g.n || jj < 1 || jj > g.m || l < 1 || l > g.n)
            throw std::invalid_argument("structure tensor index out of range");
        g.c.at(k - 1, jj - 1, l - 1) = Rational(e.at("num").get<int64_t>(), e.at("den").get<int64_t>());
    }
    g.validate();
    return g;
}

json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows; ++i) {
        json r = json::array();
        for (int k = 0; k < m.cols; ++k) r.push_back(m(i, k));
        rows.push_back(std::move(r));
    }
    return rows;
}

Mat mat_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw std::invalid_argument("matrix record must be a nonempty array");
    int rows = static_cast<int>(j.size());
    int cols = static_cast<int>(j[0].size());
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (static_cast<int>(j[i].size()) != cols) throw std::invalid_argument("ragged matrix record");
        for (int k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

json model_to_json(const ModelSpec& m) {
    json j;
    j["geometry"] = geometry_to_json(m.geom);
    j["beta"] = m.beta;
    j["G"] = mat_to_json(m.G);
    json a;
    if (m.alpha.is_zero()) {
        a["preset"] = "zero";
    } else {
        a["preset"] = "tanh_first";
        json amps = json::array();
        for (double s : m.alpha.sup_alpha) amps.push_back(s);
        a["amplitudes"] = std::move(amps);
    }
    j["alpha"] = std::move(a);
    return j;
}

ModelSpec model_from_json(const json& j) {
    Geometry g;
    const json& geo = j.at("geometry");
    if (geo.is_string())
        g = geometry_by_name(geo.get<std::string>());
    else
        g = geometry_from_json(geo);
    ModelSpec m = ModelSpec::plain(g, j.at("beta").get<double>());
    if (j.contains("G")) {
        Mat G = mat_from_json(j.at("G"));
        if (G.rows != g.m || G.cols != g.m) throw std::invalid_argument("G must be m x m");
        m.G = G;
    }
    if (j.contains("alpha")) {
        const json& a = j.at("alpha");
        std::string preset = a.at("preset").get<std::string>();
        if (preset == "zero") {
            m.alpha = AlphaSpec::zero(g);
        } else if (preset == "tanh_first") {
            std::vector<double> amps = a.at("amplitudes").get<std::vector<double>>();
            m.alpha = AlphaSpec::tanh_first(g, amps);
        } else {
            throw std::invalid_argument("unknown alpha preset '" + preset + "'");
        }
    }
    m.validate();
    return m;
}

json to_json(const EstimatorResult& r) {
    return json{{"t", r.time}, {"value", r.value}, {"std_err", r.std_err}, {"n_paths", r.n_paths}};
}

json to_json(const BoundCheck& c) {
    json j;
    j["t"] = c.t;
    j["lhs"] = to_json(c.lhs);
    j["rhs"] = to_json(c.rhs);
    j["combined_err"] = c.combined_err;
    j["margin_sigma"] = c.margin_sigma;
    j["verdict"] = verdict_name(c.verdict);
    return j;
}

json to_json(const KappaReport& r) {
    json j;
    j["beta"] = r.beta;
    j["lambda_star"] = r.lambda_star;
    j["delta"] = r.delta;
    j["C1"] = r.C1;
    j["C2"] = r.C2;
    j["C3"] = r.C3;
    j["eta"] = r.eta;
    j["kappa"] = r.kappa;
    j["beta_threshold"] = r.beta_threshold;
    if (r.C1_alt) j["C1_alt"] = *r.C1_alt;
    if (r.exact) {
        json e;
        e["slope"] = r.exact->slope.str();
        e["intercept"] = r.exact->intercept.str();
        e["threshold"] = r.exact->threshold.str();
        j["exact"] = std::move(e);
    }
    return j;
}

json to_json(const PointwiseKappa& r) {
    return json{{"C1", r.C1}, {"C2", r.C2},       {"C3", r.C3},      {"C4", r.C4},
                {"eta", r.eta}, {"delta", r.delta}, {"kappa", r.kappa}};
}

json to_json(const LqReport& r) {
    return json{{"q", r.q},
                {"beta", r.beta},
                {"pairing", r.pairing},
                {"square_sum", r.square_sum},
                {"kappa_q", r.kappa_q},
                {"beta_threshold", r.beta_threshold}};
}

json to_json(const LyapunovReport& r) {
    json checks = json::array();
    for (const auto& c : r.checks) checks.push_back(to_json(c));
    return json{{"drift_bound", r.drift_bound}, {"rho_x0", r.rho_x0}, {"checks", std::move(checks)}};
}

json to_json(const ExpMomentReport& r) {
    json rows = json::array();
    for (size_t i = 0; i < r.deltas.size(); ++i)
        rows.push_back(json{{"delta", r.deltas[i]}, {"excess", r.excess[i]}, {"std_err", r.excess_se[i]}});
    return json{{"gamma_bound", r.gamma_bound},
                {"kappa", r.kappa},
                {"rows", std::move(rows)},
                {"slope", r.fit.slope},
                {"slope_se", r.fit.slope_se},
                {"slope_limit", r.slope_limit},
                {"verdict", verdict_name(r.verdict)}};
}

json to_json(const LatticeConstants& c) {
    json m = json::array();
    for (const auto& [v, val] : c.M) m.push_back(json{{"offset", v}, {"value", val}});
    return json{{"S1", c.S1},
                {"Smax", c.Smax},
                {"sup_alpha", c.sup_alpha},
                {"A_sup", c.A_sup},
                {"C_tilde", c.C_tilde},
                {"C", c.C},
                {"kappa_bar", c.kappa_bar},
                {"M", std::move(m)},
                {"M_max", c.M_max},
                {"varsigma", c.varsigma},
                {"beta_threshold", c.beta_threshold},
                {"site", to_json(c.site)}};
}

json to_json(const SpeedReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back(json{{"site", row.site}, {"n_k", row.n_k}, {"gamma", row.gamma},
                            {"std_err", row.gamma_se}});
    return json{{"t", r.t},
                {"rows", std::move(rows)},
                {"fit_rows", r.fit_rows},
                {"spearman", r.spearman},
                {"envelope_slope", r.envelope.slope},
                {"envelope_slope_se", r.envelope.slope_se},
                {"envelope_intercept", r.envelope.intercept},
                {"shape_C", r.shape_C},
                {"shape_offset", r.shape_offset},
                {"n_paths", r.n_paths}};
}

json to_json(const CauchyReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back(json{{"probe", row.probe}, {"diff", row.diff}, {"std_err", row.se}, {"n", row.n}});
    return json{{"n_bar", r.n_bar},
                {"max_abs_diff", r.max_abs_diff},
                {"se_at_max", r.se_at_max},
                {"rows", std::move(rows)}};
}

json to_json(const ErgodicityReport& r) {
    json rows = json::array();
    for (const auto& d : r.diff) rows.push_back(to_json(d));
    return json{{"rows", std::move(rows)},
                {"fit_rows", r.fit_rows},
                {"converged_early", r.converged_early},
                {"slope", r.fit.slope},
                {"slope_se", r.fit.slope_se},
                {"rate", r.rate},
                {"rate_se", r.rate_se},
                {"rate_positive_95", r.rate_positive_95}};
}

json to_json(const OmegaReport& r) {
    return json{{"zeta", r.zeta}, {"bound", r.bound}, {"sum", r.sum}, {"member", r.member}};
}

std::string config_hash(const json& config) {
    std::string s = config.dump();  // nlohmann keeps object keys sorted
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream out;
    out << std::hex << h;
    return out.str();
}

} // namespace hypo
