#include "hypocoerce/estimators.hpp"

#include "hypocoerce/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace hypo {

std::string verdict_name(Verdict v) {
    switch (v) {
        case Verdict::holds: return "holds";
        case Verdict::violated: return "violated";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

BoundCheck judge_bound(double t, const EstimatorResult& lhs, const EstimatorResult& rhs,
                       double bias_floor) {
    BoundCheck c;
    c.t = t;
    c.lhs = lhs;
    c.rhs = rhs;
    c.combined_err = std::sqrt(lhs.std_err * lhs.std_err + rhs.std_err * rhs.std_err) + bias_floor;
    double diff = lhs.value - rhs.value;
    c.margin_sigma = c.combined_err > 0 ? -diff / c.combined_err : (diff <= 0 ? INFINITY : -INFINITY);
    if (diff > 3.0 * c.combined_err)
        c.verdict = Verdict::violated;
    else if (diff <= 2.0 * c.combined_err)
        c.verdict = Verdict::holds;
    else
        c.verdict = Verdict::inconclusive;
    return c;
}

namespace {

void enforce_quota(const EnsembleResult& res, const SemigroupConfig& cfg) {
    double quota = cfg.blowup_quota * static_cast<double>(res.n_paths);
    if (static_cast<double>(res.blown_paths) > quota)
        throw BlowupError(res.first_blown_path, res.first_blown_step, res.blown_paths, res.n_paths);
}

EstimatorResult cell_result(const EnsembleResult& res, size_t g, size_t q) {
    EstimatorResult r;
    r.time = res.times[g];
    r.value = res.mean(g, q);
    r.std_err = res.std_err(g, q);
    r.n_paths = res.cells[g][q].n_ok;
    return r;
}

// deterministic-bias allowance for weak-order-1 stepping and O(h^2) stencils
double bias_floor(const SemigroupConfig& cfg, double lhs, double rhs, bool fd_based) {
    double h2 = fd_based ? cfg.fd_h * cfg.fd_h : 0.0;
    return (cfg.dt + h2) * (std::abs(lhs) + std::abs(rhs) + 1e-3);
}

} // namespace

std::vector<EstimatorResult> estimate_Ptf(const ModelSpec& model, const SdeSystem& sys,
                                          const Observable& f, std::span<const double> x0,
                                          const std::vector<double>& t_grid,
                                          const SemigroupConfig& cfg) {
    (void)model;
    std::vector<std::vector<double>> init = {std::vector<double>(x0.begin(), x0.end())};
    auto res = run_ensemble(
        sys, cfg.ensemble(), init, {}, t_grid, 1,
        [&](size_t, size_t, const BundleView& v, double* out) {
            out[0] = f.eval({v.state(0), static_cast<size_t>(v.dim)});
        });
    enforce_quota(res, cfg);
    std::vector<EstimatorResult> out;
    for (size_t g = 0; g < res.times.size(); ++g) out.push_back(cell_result(res, g, 0));
    return out;
}

GradientSuite run_gradient_suite(const ModelSpec& model, const SdeSystem& sys,
                                 const Observable& f, std::span<const double> x0,
                                 const std::vector<double>& t_grid, const SemigroupConfig& cfg,
                                 const SuiteOptions& opts) {
    const Geometry& g = model.geom;
    const int n = g.n;
    const size_t dim = static_cast<size_t>(g.N);
    if (static_cast<int>(x0.size()) != g.N) throw std::invalid_argument("base point arity mismatch");

    Observable gamma_tree = carre_du_champ(g.Z, f);
    std::vector<Observable> df;
    if (cfg.use_tangent)
        for (int q = 0; q < g.N; ++q) df.push_back(f.diff(q));

    std::vector<std::vector<double>> init;
    std::vector<std::vector<double>> tangents;
    init.push_back(std::vector<double>(x0.begin(), x0.end()));
    const double h = cfg.fd_h;
    if (cfg.use_tangent) {
        for (int k = 0; k < n; ++k) {
            std::vector<double> v(dim);
            g.Z[k].eval(x0, v);
            tangents.push_back(std::move(v));
        }
    } else {
        for (int k = 0; k < n; ++k) {
            init.push_back(flow_exp(g.Z[k], x0, h));
            init.push_back(flow_exp(g.Z[k], x0, -h));
            init.push_back(flow_exp(g.Z[k], x0, 0.5 * h));
            init.push_back(flow_exp(g.Z[k], x0, -0.5 * h));
        }
    }

    const int n_mom = std::max(1, opts.f_moment_count);
    const size_t n_gp = opts.gamma_powers.size();
    const size_t deriv_per_k = cfg.use_tangent ? 1 : 3;
    const size_t nq = n_mom + n_gp + deriv_per_k * n;

    auto res = run_ensemble(
        sys, cfg.ensemble(), init, tangents, t_grid, nq,
        [&](size_t, size_t, const BundleView& v, double* out) {
            std::span<const double> base{v.state(0), dim};
            double fv = f.eval(base);
            double acc = 1;
            for (int p = 0; p < n_mom; ++p) {
                acc *= fv;
                out[p] = acc;
            }
            double gv = gamma_tree.eval(base);
            for (size_t ip = 0; ip < n_gp; ++ip) {
                double pw = opts.gamma_powers[ip];
                out[n_mom + ip] = pw == 1.0 ? gv : std::pow(std::max(gv, 0.0), pw);
            }
            size_t off = n_mom + n_gp;
            if (cfg.use_tangent) {
                std::vector<double> grad(dim);
                for (size_t q = 0; q < dim; ++q) grad[q] = df[q].eval(base);
                for (int k = 0; k < n; ++k) {
                    const double* tv = v.tangent(k);
                    double s = 0;
                    for (size_t q = 0; q < dim; ++q) s += grad[q] * tv[q];
                    out[off + k] = s;
                }
            } else {
                for (int k = 0; k < n; ++k) {
                    std::span<const double> p1{v.state(1 + 4 * k), dim};
                    std::span<const double> m1{v.state(2 + 4 * k), dim};
                    std::span<const double> p2{v.state(3 + 4 * k), dim};
                    std::span<const double> m2{v.state(4 + 4 * k), dim};
                    double dh = (f.eval(p1) - f.eval(m1)) / (2.0 * h);
                    double dh2 = (f.eval(p2) - f.eval(m2)) / h;
                    out[off + 3 * k] = dh;
                    out[off + 3 * k + 1] = dh2;
                    out[off + 3 * k + 2] = (4.0 * dh2 - dh) / 3.0;
                }
            }
        });
    enforce_quota(res, cfg);

    GradientSuite suite;
    suite.times = res.times;
    suite.n_paths = cfg.n_paths;
    suite.gamma_powers.assign(opts.gamma_powers.begin(), opts.gamma_powers.end());
    for (size_t gi = 0; gi < res.times.size(); ++gi) {
        std::vector<EstimatorResult> moms, gams, zks;
        for (int p = 0; p < n_mom; ++p) moms.push_back(cell_result(res, gi, p));
        for (size_t ip = 0; ip < n_gp; ++ip) gams.push_back(cell_result(res, gi, n_mom + ip));
        size_t off = n_mom + n_gp;
        for (int k = 0; k < n; ++k) {
            if (cfg.use_tangent) {
                zks.push_back(cell_result(res, gi, off + k));
            } else {
                EstimatorResult rh = cell_result(res, gi, off + 3 * k);
                EstimatorResult rh2 = cell_result(res, gi, off + 3 * k + 1);
                EstimatorResult rich = cell_result(res, gi, off + 3 * k + 2);
                // refine when the h->h/2 gap is not buried in noise
                bool refine = std::abs(rh.value - rh2.value) >= 0.1 * rh2.std_err;
                zks.push_back(refine ? rich : rh);
            }
        }
        suite.f_moments.push_back(std::move(moms));
        suite.gamma.push_back(std::move(gams));
        suite.zk.push_back(std::move(zks));
    }
    return suite;
}

std::vector<EstimatorResult> estimate_Zk_Ptf(const ModelSpec& model, const SdeSystem& sys,
                                             const Observable& f, std::span<const double> x0,
                                             const std::vector<double>& t_grid, int k,
                                             const SemigroupConfig& cfg) {
    if (k < 0 || k >= model.geom.n) throw std::out_of_range("frame index");
    GradientSuite s = run_gradient_suite(model, sys, f, x0, t_grid, cfg);
    std::vector<EstimatorResult> out;
    for (const auto& row : s.zk) out.push_back(row[k]);
    return out;
}

namespace {

// lhs of the gradient bound: bias-corrected sum of squared derivative means
EstimatorResult squared_gradient(const std::vector<EstimatorResult>& zk, double t) {
    EstimatorResult r;
    r.time = t;
    double var_acc = 0;
    for (const auto& e : zk) {
        SquaredMean sq = squared_mean(e.value, e.std_err);
        r.value += sq.value;
        var_acc += sq.std_err * sq.std_err;
        r.n_paths = e.n_paths;
    }
    r.std_err = std::sqrt(var_acc);
    return r;
}

} // namespace

std::vector<BoundCheck> check_gradient_bound(const ModelSpec& model, const SdeSystem& sys,
                                             const Observable& f, std::span<const double> x0,
                                             const std::vector<double>& t_grid,
                                             const SemigroupConfig& cfg,
                                             const KappaReport& rate) {
    GradientSuite s = run_gradient_suite(model, sys, f, x0, t_grid, cfg);
    std::vector<BoundCheck> out;
    for (size_t gi = 0; gi < s.times.size(); ++gi) {
        double t = s.times[gi];
        EstimatorResult lhs = squared_gradient(s.zk[gi], t);
        EstimatorResult rhs = s.gamma[gi][0];
        double decay = std::exp(-rate.kappa * t);
        rhs.value *= decay;
        rhs.std_err *= decay;
        out.push_back(judge_bound(t, lhs, rhs, bias_floor(cfg, lhs.value, rhs.value, !cfg.use_tangent)));
    }
    return out;
}

std::vector<BoundCheck> check_lq_bound(const ModelSpec& model, const SdeSystem& sys,
                                       const Observable& f, std::span<const double> x0,
                                       const std::vector<double>& t_grid, double q,
                                       const SemigroupConfig& cfg) {
    bool g_zero = true;
    for (double v : model.G.a)
        if (v != 0.0) g_zero = false;
    if (!g_zero || !model.alpha.is_zero())
        throw std::invalid_argument("the L^q bound is only available for G = 0 and alpha = 0");
    LqReport lr = kappa_q(model.geom, model.beta, q);

    SuiteOptions opts;
    opts.gamma_powers = {q / 2.0};
    GradientSuite s = run_gradient_suite(model, sys, f, x0, t_grid, cfg, opts);

    std::vector<BoundCheck> out;
    for (size_t gi = 0; gi < s.times.size(); ++gi) {
        double t = s.times[gi];
        EstimatorResult sq = squared_gradient(s.zk[gi], t);
        EstimatorResult lhs;
        lhs.time = t;
        lhs.n_paths = sq.n_paths;
        double base = std::max(sq.value, 0.0);
        lhs.value = std::pow(base, q / 2.0);
        lhs.std_err = base > 0 ? 0.5 * q * std::pow(base, q / 2.0 - 1.0) * sq.std_err : sq.std_err;
        EstimatorResult rhs = s.gamma[gi][0];
        double decay = std::exp(-lr.kappa_q * t);
        rhs.value *= decay;
        rhs.std_err *= decay;
        out.push_back(judge_bound(t, lhs, rhs, bias_floor(cfg, lhs.value, rhs.value, !cfg.use_tangent)));
    }
    return out;
}

namespace {

struct RhoEvaluator {
    enum class Family { gauge, euclid } family;
    HTypeGauge gauge{2};
    int dim;

    static RhoEvaluator for_geometry(const Geometry& g) {
        if (g.name == "heisenberg") return {Family::gauge, HTypeGauge(2), 3};
        if (g.name.rfind("abelian", 0) == 0) return {Family::euclid, HTypeGauge(2), g.N};
        throw std::invalid_argument("no gauge-cutoff function for geometry '" + g.name + "'");
    }

    double rho(std::span<const double> p) const {
        if (family == Family::gauge) return CutoffRho::g(gauge.value(p));
        double r2 = 0;
        for (double v : p) r2 += v * v;
        return CutoffRho::g(std::sqrt(r2));
    }

    // generator applied to rho at a point: diffusion part (with G), friction
    // part, and the sup-alpha envelope of the first-order part
    double generator_bound(std::span<const double> p, const ModelSpec& model) const {
        if (family == Family::gauge) {
            GaugeDerivs d = cutoff_derivs(gauge, p, model.G.a.data());
            double nval = gauge.value(p);
            if (nval <= 1.0) return 0.0;
            double dn = gauge.dilation_n(p);
            double drift = -model.beta * CutoffRho::dg(nval) * dn;
            double alpha_env = 0;
            for (int i = 0; i < gauge.m; ++i)
                alpha_env += model.alpha.sup_alpha[i] *
                             std::abs(CutoffRho::dg(nval) * gauge.xi_n(p, i));
            return d.sublap + drift + alpha_env;
        }
        double r2 = 0;
        for (double v : p) r2 += v * v;
        double r = std::sqrt(r2);
        if (r <= 1.0) return 0.0;
        double g1 = CutoffRho::dg(r), g2 = CutoffRho::d2g(r);
        int nd = dim;
        double lap = g2 + g1 * static_cast<double>(nd - 1) / r;
        double cross = 0;
        for (int i = 0; i < nd; ++i)
            for (int j = 0; j < nd; ++j) {
                double w = model.G(i, j);
                if (w == 0.0) continue;
                double hess = g2 * p[i] * p[j] / r2 +
                              g1 * ((i == j ? 1.0 : 0.0) / r - p[i] * p[j] / (r2 * r));
                cross += w * hess;
            }
        double drift = -model.beta * g1 * r;
        double alpha_env = 0;
        for (int i = 0; i < nd; ++i)
            alpha_env += model.alpha.sup_alpha[i] * std::abs(g1 * p[i] / r);
        return lap + cross + drift + alpha_env;
    }
};

} // namespace

LyapunovReport check_lyapunov(const ModelSpec& model, const SdeSystem& sys,
                              std::span<const double> x0, const std::vector<double>& t_grid,
                              const SemigroupConfig& cfg) {
    RhoEvaluator rho = RhoEvaluator::for_geometry(model.geom);
    const int dim = model.geom.N;

    // grid-certified uniform bound on L rho over the transition band and the
    // linear-growth tail; seeded sampling keeps the constant reproducible
    const uint64_t probe_seed = 0x9a75c0ffULL;
    const size_t n_probe = 40000;
    double c_bound = 0.0;
    std::vector<double> pt(dim);
    for (size_t i = 0; i < n_probe; ++i) {
        for (int q = 0; q < dim; ++q) {
            double u = uniform01(probe_seed, i, 0, static_cast<uint64_t>(q));
            bool center_coord = (rho.family == RhoEvaluator::Family::gauge && q == dim - 1);
            double half_width = center_coord ? 9.0 : 6.0;
            pt[q] = (2.0 * u - 1.0) * half_width;
        }
        c_bound = std::max(c_bound, rho.generator_bound(pt, model));
    }

    std::vector<std::vector<double>> init = {std::vector<double>(x0.begin(), x0.end())};
    auto res = run_ensemble(
        sys, cfg.ensemble(), init, {}, t_grid, 1,
        [&](size_t, size_t, const BundleView& v, double* out) {
            out[0] = rho.rho({v.state(0), static_cast<size_t>(v.dim)});
        });
    enforce_quota(res, cfg);

    LyapunovReport rep;
    rep.drift_bound = c_bound;
    rep.rho_x0 = rho.rho(x0);
    for (size_t gi = 0; gi < res.times.size(); ++gi) {
        double t = res.times[gi];
        EstimatorResult lhs = cell_result(res, gi, 0);
        EstimatorResult rhs;
        rhs.time = t;
        rhs.value = rep.rho_x0 + c_bound * t;
        rhs.std_err = 0;
        rhs.n_paths = lhs.n_paths;
        rep.checks.push_back(judge_bound(t, lhs, rhs, bias_floor(cfg, lhs.value, rhs.value, false)));
    }
    return rep;
}

std::vector<BoundCheck> check_poincare(const ModelSpec& model, const SdeSystem& sys,
                                       const Observable& f, std::span<const double> x0,
                                       const std::vector<double>& t_grid,
                                       const SemigroupConfig& cfg, const KappaReport& rate) {
    SuiteOptions opts;
    opts.f_moment_count = 4;
    GradientSuite s = run_gradient_suite(model, sys, f, x0, t_grid, cfg, opts);

    std::vector<BoundCheck> out;
    for (size_t gi = 0; gi < s.times.size(); ++gi) {
        double t = s.times[gi];
        double m1 = s.f_moments[gi][0].value;
        double m2 = s.f_moments[gi][1].value;
        double m3 = s.f_moments[gi][2].value;
        double m4 = s.f_moments[gi][3].value;
        double n = static_cast<double>(s.f_moments[gi][0].n_paths);

        EstimatorResult lhs;
        lhs.time = t;
        lhs.n_paths = s.f_moments[gi][0].n_paths;
        double var = std::max(m2 - m1 * m1, 0.0);
        lhs.value = n > 1 ? var * n / (n - 1.0) : var;
        double mu4c = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1 * m1 * m1 * m1;
        lhs.std_err = n > 1 ? std::sqrt(std::max(mu4c - var * var, 0.0) / n) : 0.0;

        EstimatorResult rhs = s.gamma[gi][0];
        double kap = rate.kappa;
        double factor = std::abs(kap) > 1e-12 ? (2.0 / kap) * (1.0 - std::exp(-kap * t)) : 2.0 * t;
        rhs.value *= factor;
        rhs.std_err *= std::abs(factor);
        out.push_back(judge_bound(t, lhs, rhs, bias_floor(cfg, lhs.value, rhs.value, false)));
    }
    return out;
}

InvariantSamples empirical_invariant_measure(const ModelSpec& model, const SdeSystem& sys,
                                             std::span<const double> x0, double burn_in,
                                             double window, double thin,
                                             const SemigroupConfig& cfg) {
    if (!(burn_in >= 0) || !(window >= 0) || !(thin > 0))
        throw std::invalid_argument("invariant sampling needs burn_in, window >= 0 and thin > 0");
    const int dim = model.geom.N;
    std::vector<double> grid;
    for (double t = burn_in; t <= burn_in + window + 1e-12; t += thin) grid.push_back(t);

    std::vector<std::vector<double>> init = {std::vector<double>(x0.begin(), x0.end())};
    size_t nq = static_cast<size_t>(dim) + 1;  // coords plus a validity marker
    auto res = run_ensemble(
        sys, cfg.ensemble(), init, {}, grid, nq,
        [&](size_t, size_t, const BundleView& v, double* out) {
            for (int q = 0; q < v.dim; ++q) out[q] = v.state(0)[q];
            out[v.dim] = 1.0;
        },
        /*store_raw=*/true);
    enforce_quota(res, cfg);

    InvariantSamples samples;
    samples.dim = dim;
    samples.burn_in = burn_in;
    samples.window = window;
    samples.thin = thin;
    for (size_t p = 0; p < cfg.n_paths; ++p)
        for (size_t g = 0; g < grid.size(); ++g) {
            const double* row = res.raw.data() + (p * grid.size() + g) * nq;
            if (row[dim] != 1.0) continue;
            samples.states.insert(samples.states.end(), row, row + dim);
            samples.n_states += 1;
        }
    return samples;
}

ExpMomentReport check_exp_moment(const ModelSpec& model, const InvariantSamples& samples,
                                 const Observable& f, const std::vector<double>& deltas,
                                 const KappaReport& rate) {
    ExpMomentReport rep;
    rep.kappa = rate.kappa;
    if (!(rate.kappa > 0))
        throw std::domain_error("exponential moment bound needs kappa > 0");

    Observable gamma_tree = carre_du_champ(model.geom.Z, f);
    auto bound = gamma_tree.certified_bound();
    if (!bound)
        throw std::domain_error("cannot certify a sup bound for Gamma f; the exponential moment "
                                "bound does not apply");
    rep.gamma_bound = *bound;
    rep.slope_limit = *bound / rate.kappa;

    for (double d : deltas)
        if (d * d * rep.gamma_bound / rate.kappa > 1.0 + 1e-12)
            throw std::domain_error("delta^2 ||Gamma f|| / kappa exceeds 1 on the requested grid");
    if (deltas.size() < 2) throw std::invalid_argument("need at least two delta values");
    if (samples.n_states < 16) throw std::invalid_argument("too few invariant samples");

    std::vector<double> xs, ys, ws;
    for (double d : deltas) {
        MomentStats ef, eexp;
        for (size_t i = 0; i < samples.n_states; ++i) {
            double fv = f.eval(samples.state(i));
            double ev = std::exp(d * fv);
            ef.n += 1; ef.sum += fv; ef.sum_sq += fv * fv;
            eexp.n += 1; eexp.sum += ev; eexp.sum_sq += ev * ev;
        }
        double excess = std::log(eexp.mean()) - d * ef.mean();
        double se = eexp.std_err() / eexp.mean() + std::abs(d) * ef.std_err();
        rep.deltas.push_back(d);
        rep.excess.push_back(excess);
        rep.excess_se.push_back(se);
        xs.push_back(d * d);
        ys.push_back(excess);
        ws.push_back(se > 0 ? 1.0 / (se * se) : 1e12);
    }
    rep.fit = fit_line(xs, ys, ws);

    double over = rep.fit.slope - rep.slope_limit;
    if (over > 3.0 * rep.fit.slope_se)
        rep.verdict = Verdict::violated;
    else if (over <= 2.0 * rep.fit.slope_se)
        rep.verdict = Verdict::holds;
    else
        rep.verdict = Verdict::inconclusive;
    return rep;
}

} // namespace hypo
