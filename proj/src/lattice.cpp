#include "hypocoerce/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace hypo {

size_t Box::size() const {
    size_t s = 1;
    for (int i = 0; i < dims(); ++i) {
        if (hi[i] < lo[i]) throw std::invalid_argument("box interval with hi < lo");
        s *= static_cast<size_t>(hi[i] - lo[i] + 1);
    }
    return s;
}

bool Box::contains(std::span<const int> s) const {
    if (static_cast<int>(s.size()) != dims()) throw std::invalid_argument("site arity mismatch");
    for (int i = 0; i < dims(); ++i)
        if (s[i] < lo[i] || s[i] > hi[i]) return false;
    return true;
}

size_t Box::index(std::span<const int> s) const {
    if (!contains(s)) throw std::out_of_range("site outside box");
    size_t idx = 0;
    for (int i = 0; i < dims(); ++i)
        idx = idx * static_cast<size_t>(hi[i] - lo[i] + 1) + static_cast<size_t>(s[i] - lo[i]);
    return idx;
}

std::vector<int> Box::site_at(size_t idx) const {
    std::vector<int> s(dims());
    for (int i = dims() - 1; i >= 0; --i) {
        size_t w = static_cast<size_t>(hi[i] - lo[i] + 1);
        s[i] = lo[i] + static_cast<int>(idx % w);
        idx /= w;
    }
    return s;
}

Box Box::centered(int d, int radius) {
    if (d < 1 || radius < 0) throw std::invalid_argument("bad box shape");
    Box b;
    b.lo.assign(d, -radius);
    b.hi.assign(d, radius);
    return b;
}

int l1_norm(std::span<const int> v) {
    int s = 0;
    for (int c : v) s += std::abs(c);
    return s;
}

int l1_dist(std::span<const int> a, std::span<const int> b) {
    int s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

int dist_to_set(std::span<const int> site, const std::vector<std::vector<int>>& set) {
    if (set.empty()) throw std::invalid_argument("distance to empty site set");
    int best = l1_dist(site, set[0]);
    for (size_t i = 1; i < set.size(); ++i) best = std::min(best, l1_dist(site, set[i]));
    return best;
}

double CouplingSpec::sum_abs() const {
    double s = 0;
    for (const auto& [v, w] : stencil) s += std::abs(w);
    return s;
}

double CouplingSpec::max_abs_offsite() const {
    double s = 0;
    for (const auto& [v, w] : stencil)
        if (l1_norm(v) > 0) s = std::max(s, std::abs(w));
    return s;
}

double CouplingSpec::weight_at_zero() const {
    for (const auto& [v, w] : stencil)
        if (l1_norm(v) == 0) return w;
    return 0;
}

CouplingSpec CouplingSpec::nearest_neighbor(int d, double amplitude, double weight) {
    CouplingSpec c;
    c.amplitude = amplitude;
    for (int i = 0; i < d; ++i)
        for (int sgn : {-1, 1}) {
            std::vector<int> v(d, 0);
            v[i] = sgn;
            c.stencil.emplace_back(std::move(v), weight);
        }
    return c;
}

ModelSpec LatticeModel::site_model() const {
    ModelSpec ms = ModelSpec::plain(site, beta);
    if (!G.a.empty()) ms.G = G;
    return ms;
}

std::vector<double> LatticeModel::frozen_state(const std::vector<int>& s) const {
    auto it = boundary_overrides.find(s);
    if (it != boundary_overrides.end()) return it->second;
    return boundary_state;
}

LatticeModel build_lattice(const LatticeParams& p) {
    LatticeModel m;
    m.box = p.box;
    const int d = m.box.dims();
    if (d < 1) throw std::invalid_argument("lattice dimension must be at least 1");
    m.box.size();  // validates intervals
    if (p.range < 0) throw std::invalid_argument("interaction range must be nonnegative");
    m.range = p.range;
    m.site = p.site;
    m.beta = p.beta;
    m.coupling = p.coupling;

    const int mm = m.site.m;
    if (p.G.a.empty()) {
        m.G = Mat(mm, mm);
    } else {
        if (p.G.rows != mm || p.G.cols != mm) throw std::invalid_argument("G must be m x m");
        m.G = p.G;
    }

    // the certified coupling bounds need constant first components of the frame
    for (int r = 0; r < m.site.n; ++r)
        if (!m.site.Z[r].comp[0].is_constant())
            throw std::invalid_argument(
                "coupling through the first coordinate needs frame fields with constant "
                "first components");

    m.interacting.assign(m.box.size(), 0);
    if (p.interaction_sites.empty()) {
        for (size_t i = 0; i < m.box.size(); ++i) {
            m.interacting[i] = 1;
            m.lambda.push_back(m.box.site_at(i));
        }
    } else {
        for (const auto& s : p.interaction_sites) {
            if (static_cast<int>(s.size()) != d)
                throw std::invalid_argument("interaction site arity mismatch");
            if (!m.box.contains(s))
                throw std::invalid_argument("interaction sites must lie inside the box");
            size_t idx = m.box.index(s);
            if (!m.interacting[idx]) {
                m.interacting[idx] = 1;
                m.lambda.push_back(s);
            }
        }
    }

    for (const auto& [v, w] : m.coupling.stencil) {
        if (static_cast<int>(v.size()) != d) throw std::invalid_argument("stencil offset arity mismatch");
        if (l1_norm(v) > m.range) throw std::invalid_argument("stencil offset exceeds the interaction range");
        (void)w;
    }

    if (p.boundary_state.empty()) {
        m.boundary_state.assign(static_cast<size_t>(m.site.N), 0.0);
    } else {
        if (static_cast<int>(p.boundary_state.size()) != m.site.N)
            throw std::invalid_argument("boundary state arity mismatch");
        m.boundary_state = p.boundary_state;
    }
    for (const auto& [s, val] : p.boundary_overrides) {
        if (static_cast<int>(s.size()) != d) throw std::invalid_argument("boundary site arity mismatch");
        if (m.box.contains(s))
            throw std::invalid_argument("boundary override for a site inside the box");
        if (static_cast<int>(val.size()) != m.site.N)
            throw std::invalid_argument("boundary override arity mismatch");
    }
    m.boundary_overrides = p.boundary_overrides;

    if (m.coupling.amplitude != 0.0) {
        int margin = m.range + 1;
        for (const auto& s : m.lambda) {
            int to_edge = INT32_MAX;
            for (int i = 0; i < d; ++i)
                to_edge = std::min({to_edge, s[i] - m.box.lo[i], m.box.hi[i] - s[i]});
            if (to_edge < margin) {
                m.warnings.push_back("interaction set reaches within the boundary shell; "
                                     "frozen-exterior truncation effects apply");
                break;
            }
        }
    }
    return m;
}

std::vector<double> flatten_state(const LatticeModel& m, const Configuration& c) {
    std::vector<double> state(m.state_dim(), 0.0);
    for (const auto& [s, val] : c.values) {
        if (!m.box.contains(s)) throw std::invalid_argument("configuration site outside the box");
        if (static_cast<int>(val.size()) != m.site_dim())
            throw std::invalid_argument("configuration state arity mismatch");
        std::copy(val.begin(), val.end(), state.begin() + m.flat(s, 0));
    }
    return state;
}

std::vector<std::vector<int>> CylinderObservable::localization() const {
    std::set<std::vector<int>> uniq;
    for (const auto& [s, c] : vars) uniq.insert(s);
    return {uniq.begin(), uniq.end()};
}

CylinderObservable CylinderObservable::coordinate(const std::vector<int>& site, int comp) {
    CylinderObservable c;
    c.f = obs::var(1, 0);
    c.vars.emplace_back(site, comp);
    return c;
}

double eval_cylinder(const CylinderObservable& f, const LatticeModel& m, const double* state) {
    std::vector<double> packed(f.vars.size());
    for (size_t j = 0; j < f.vars.size(); ++j)
        packed[j] = state[m.flat(f.vars[j].first, f.vars[j].second)];
    return f.f.eval(packed);
}

LatticeSystem::LatticeSystem(const LatticeModel& m) {
    site_n_ = m.site_dim();
    m_ = m.site.m;
    n_dim_ = static_cast<int>(m.state_dim());
    n_channels_ = static_cast<int>(m.n_sites()) * m_;
    core_ = assemble_sde(m.site_model());

    std::vector<std::pair<double, const VectorField*>> parts;
    for (int i = 0; i < m_; ++i) parts.emplace_back(1.0, &m.site.Z[i]);
    xsum_ = CompiledField::combo(site_n_, parts);

    const double a = m.coupling.amplitude;
    if (a != 0.0) {
        for (const auto& k : m.lambda) {
            SiteCoupling sc;
            sc.block = m.flat(k, 0);
            for (const auto& [v, J] : m.coupling.stencil) {
                std::vector<int> nb(k.size());
                for (size_t i = 0; i < k.size(); ++i) nb[i] = k[i] + v[i];
                double w = a * J;
                if (w == 0.0) continue;
                if (m.box.contains(nb))
                    sc.live.push_back({w, m.flat(nb, 0)});
                else
                    sc.frozen_drive += w * std::tanh(m.frozen_state(nb)[0]);
            }
            if (!sc.live.empty() || sc.frozen_drive != 0.0) coupling_.push_back(std::move(sc));
        }
    }
}

void LatticeSystem::drift(const double* x, bool ito, double* out) const {
    for (int p = 0; p < n_dim_; ++p) out[p] = 0;
    const size_t sites = static_cast<size_t>(n_dim_) / site_n_;
    for (size_t s = 0; s < sites; ++s) {
        const double* xs = x + s * site_n_;
        double* os = out + s * site_n_;
        core_.drift_base.add_eval(xs, 1.0, os);
        if (ito) core_.ito_shift.add_eval(xs, 1.0, os);
    }
    for (const SiteCoupling& sc : coupling_) {
        double alpha = sc.frozen_drive;
        for (const LiveNeighbor& nb : sc.live) alpha += nb.weight * std::tanh(x[nb.first_flat]);
        if (alpha != 0.0) xsum_.add_eval(x + sc.block, alpha, out + sc.block);
    }
}

void LatticeSystem::diffusion_add(const double* x, const double* z, double w, double* out) const {
    for (int c = 0; c < n_channels_; ++c) {
        if (z[c] == 0.0) continue;
        size_t s = static_cast<size_t>(c) / m_;
        int i = c % m_;
        core_.diff_col[i].add_eval(x + s * site_n_, w * z[c], out + s * site_n_);
    }
}

void LatticeSystem::jvp_drift(const double* x, const double* v, bool ito, double* out) const {
    for (int p = 0; p < n_dim_; ++p) out[p] = 0;
    const size_t sites = static_cast<size_t>(n_dim_) / site_n_;
    for (size_t s = 0; s < sites; ++s) {
        const double* xs = x + s * site_n_;
        const double* vs = v + s * site_n_;
        double* os = out + s * site_n_;
        core_.drift_base.add_jvp(xs, vs, 1.0, os);
        if (ito) core_.ito_shift.add_jvp(xs, vs, 1.0, os);
    }
    for (const SiteCoupling& sc : coupling_) {
        double alpha = sc.frozen_drive;
        double dalpha = 0;
        for (const LiveNeighbor& nb : sc.live) {
            double th = std::tanh(x[nb.first_flat]);
            alpha += nb.weight * th;
            dalpha += nb.weight * (1.0 - th * th) * v[nb.first_flat];
        }
        if (alpha != 0.0) xsum_.add_jvp(x + sc.block, v + sc.block, alpha, out + sc.block);
        if (dalpha != 0.0) xsum_.add_eval(x + sc.block, dalpha, out + sc.block);
    }
}

void LatticeSystem::jvp_diffusion_add(const double* x, const double* v, const double* z, double w,
                                      double* out) const {
    for (int c = 0; c < n_channels_; ++c) {
        if (z[c] == 0.0) continue;
        size_t s = static_cast<size_t>(c) / m_;
        int i = c % m_;
        core_.diff_col[i].add_jvp(x + s * site_n_, v + s * site_n_, w * z[c], out + s * site_n_);
    }
}

LatticeConstants lattice_constants(const LatticeModel& m) {
    LatticeConstants lc;
    const int mm = m.site.m;
    for (int r = 0; r < m.site.n; ++r) {
        auto c0 = m.site.Z[r].comp[0].coeff(std::vector<int>(m.site.N, 0));
        double z1 = std::abs(c0.to_double());
        lc.S1 += z1;
        lc.Smax = std::max(lc.Smax, z1);
    }
    const double a = std::abs(m.coupling.amplitude);
    const double J0 = std::abs(m.coupling.weight_at_zero());
    const double Joff = m.coupling.sum_abs() - J0;
    lc.sup_alpha = a * m.coupling.sum_abs();

    // A_k = max_r sum_i |Z_r alpha_k,i| + max_i sum_r |Z_r alpha_k,i|
    //       + sum_{j != k} max_r sum_i |Z_r alpha_j,i|, uniform over k
    lc.A_sup = a * J0 * (mm * lc.Smax + lc.S1) + a * Joff * mm * lc.Smax;

    for (const auto& [v, J] : m.coupling.stencil) {
        if (l1_norm(v) == 0) continue;
        lc.M.emplace_back(v, a * std::abs(J) * lc.S1);
        lc.M_max = std::max(lc.M_max, a * std::abs(J) * lc.S1);
    }

    ModelSpec ms = m.site_model();
    ms.alpha = AlphaSpec::zero(m.site);
    for (int i = 0; i < mm; ++i) ms.alpha.sup_alpha[i] = lc.sup_alpha;
    lc.site = kappa(ms);

    lc.C_tilde = 0.5 * (lc.site.C1 + lc.site.C2 + lc.site.C3 / lc.site.delta);
    lc.C = lc.C_tilde + lc.A_sup;
    double lam = lc.site.lambda_star;
    lc.kappa_bar = 2.0 * (m.beta * lam - lc.C);
    lc.beta_threshold = lc.C / lam;
    lc.varsigma = lc.kappa_bar - lc.M_max;
    return lc;
}

namespace {

// frame derivatives of a cylinder function at a full lattice state
struct CylinderGradient {
    const LatticeModel* model;
    const CylinderObservable* f;
    std::vector<Observable> df;        // per packed variable
    std::vector<size_t> flat;          // per packed variable
    std::vector<std::vector<int>> loc; // localization

    CylinderGradient(const LatticeModel& m, const CylinderObservable& cyl)
        : model(&m), f(&cyl), loc(cyl.localization()) {
        for (size_t j = 0; j < cyl.vars.size(); ++j) {
            df.push_back(cyl.f.diff(static_cast<int>(j)));
            flat.push_back(m.flat(cyl.vars[j].first, cyl.vars[j].second));
        }
    }

    void gather(const double* state, std::vector<double>& packed) const {
        packed.resize(flat.size());
        for (size_t j = 0; j < flat.size(); ++j) packed[j] = state[flat[j]];
    }

    // directional derivative of f along a full-state tangent
    double along(const std::vector<double>& packed, const double* tangent) const {
        double s = 0;
        for (size_t j = 0; j < flat.size(); ++j) s += df[j].eval(packed) * tangent[flat[j]];
        return s;
    }

    // Gamma_Lambda f = sum over localization sites j and frame r of |Z_{j,r} f|^2
    double gamma_lambda(const std::vector<double>& packed, const double* state) const {
        const Geometry& g = model->site;
        double total = 0;
        for (const auto& site : loc) {
            const double* xs = state + model->flat(site, 0);
            std::span<const double> xspan{xs, static_cast<size_t>(g.N)};
            for (int r = 0; r < g.n; ++r) {
                double zf = 0;
                for (size_t j = 0; j < flat.size(); ++j) {
                    if (f->vars[j].first != site) continue;
                    double comp = g.Z[r].comp[f->vars[j].second].eval(xspan);
                    if (comp != 0.0) zf += comp * df[j].eval(packed);
                }
                total += zf * zf;
            }
        }
        return total;
    }
};

} // namespace

LatticeGammaReport lattice_gamma_suite(const LatticeModel& model, const LatticeSystem& sys,
                                       const CylinderObservable& f, const Configuration& omega,
                                       const std::vector<double>& t_grid,
                                       const SemigroupConfig& cfg,
                                       const std::vector<std::vector<int>>& report_sites) {
    const Geometry& g = model.site;
    const size_t dim = model.state_dim();
    std::vector<double> x0 = flatten_state(model, omega);

    CylinderGradient grad(model, f);
    if (grad.loc.empty()) throw std::invalid_argument("cylinder observable reads no coordinates");

    std::vector<std::vector<double>> tangents;
    for (const auto& k : report_sites) {
        if (!model.box.contains(k)) throw std::invalid_argument("report site outside the box");
        const double* xk = x0.data() + model.flat(k, 0);
        for (int r = 0; r < g.n; ++r) {
            std::vector<double> v(dim, 0.0);
            std::span<double> block{v.data() + model.flat(k, 0), static_cast<size_t>(g.N)};
            std::vector<double> zr(g.N);
            g.Z[r].eval({xk, static_cast<size_t>(g.N)}, zr);
            std::copy(zr.begin(), zr.end(), block.begin());
            tangents.push_back(std::move(v));
        }
    }

    const size_t n_var = tangents.size();
    const size_t nq = n_var + 1;
    auto res = run_ensemble(
        sys, cfg.ensemble(), {x0}, tangents, t_grid, nq,
        [&](size_t, size_t, const BundleView& v, double* out) {
            thread_local std::vector<double> packed;
            grad.gather(v.state(0), packed);
            for (size_t tv = 0; tv < n_var; ++tv) out[tv] = grad.along(packed, v.tangent(tv));
            out[n_var] = grad.gamma_lambda(packed, v.state(0));
        });
    double quota = cfg.blowup_quota * static_cast<double>(res.n_paths);
    if (static_cast<double>(res.blown_paths) > quota)
        throw BlowupError(res.first_blown_path, res.first_blown_step, res.blown_paths, res.n_paths);

    LatticeGammaReport rep;
    rep.times = res.times;
    rep.n_paths = cfg.n_paths;
    for (size_t gi = 0; gi < res.times.size(); ++gi) {
        std::vector<SiteGamma> row;
        for (size_t si = 0; si < report_sites.size(); ++si) {
            SiteGamma sg;
            sg.site = report_sites[si];
            sg.n_k = dist_to_set(sg.site, grad.loc) / std::max(model.range, 1);
            double var_acc = 0;
            for (int r = 0; r < g.n; ++r) {
                size_t q = si * static_cast<size_t>(g.n) + static_cast<size_t>(r);
                SquaredMean sq = squared_mean(res.mean(gi, q), res.std_err(gi, q));
                sg.gamma += sq.value;
                var_acc += sq.std_err * sq.std_err;
            }
            sg.gamma_se = std::sqrt(var_acc);
            row.push_back(std::move(sg));
        }
        rep.site_gamma.push_back(std::move(row));
        EstimatorResult gl;
        gl.time = res.times[gi];
        gl.value = res.mean(gi, n_var);
        gl.std_err = res.std_err(gi, n_var);
        gl.n_paths = res.cells[gi][n_var].n_ok;
        rep.gamma_lambda.push_back(gl);
    }
    return rep;
}

namespace {

double shape_value(double logC, int n_k, double t) {
    double s = std::exp(logC) * t;
    if (n_k > 0)
        s += n_k * (logC - std::log(static_cast<double>(n_k)) + 2.0 + std::log(t));
    return s;
}

// SSE of log gamma against offset + shape(logC, N_k), offset solved exactly
double shape_sse(double logC, const std::vector<int>& nk, const std::vector<double>& lg, double t,
                 double* offset_out) {
    double off = 0;
    for (size_t i = 0; i < nk.size(); ++i) off += lg[i] - shape_value(logC, nk[i], t);
    off /= static_cast<double>(nk.size());
    double sse = 0;
    for (size_t i = 0; i < nk.size(); ++i) {
        double r = lg[i] - off - shape_value(logC, nk[i], t);
        sse += r * r;
    }
    if (offset_out) *offset_out = off;
    return sse;
}

} // namespace

SpeedReport finite_speed_profile(const LatticeModel& model, const LatticeSystem& sys,
                                 const CylinderObservable& f, double t,
                                 const std::vector<Configuration>& probes,
                                 const SemigroupConfig& cfg,
                                 const std::vector<std::vector<int>>& report_sites) {
    if (probes.empty()) throw std::invalid_argument("probe set is empty");
    if (!(t > 0)) throw std::invalid_argument("profile time must be positive");
    auto loc = f.localization();
    for (const auto& s : loc) {
        if (!model.box.contains(s))
            throw std::invalid_argument("cylinder observable reads a site outside the box");
        if (!model.interacting[model.box.index(s)])
            throw std::invalid_argument("cylinder observable must localize inside the interaction set");
    }

    std::vector<std::vector<int>> sites = report_sites;
    if (sites.empty()) {
        for (size_t i = 0; i < model.n_sites(); ++i) {
            auto s = model.box.site_at(i);
            if (std::find(loc.begin(), loc.end(), s) == loc.end()) sites.push_back(s);
        }
    }

    SpeedReport rep;
    rep.t = t;
    rep.n_paths = cfg.n_paths;
    for (size_t pi = 0; pi < probes.size(); ++pi) {
        SemigroupConfig pc = cfg;
        pc.salt = cfg.salt + static_cast<uint32_t>(pi);  // independent noise per probe
        auto rg = lattice_gamma_suite(model, sys, f, probes[pi], {t}, pc, sites);
        const auto& row = rg.site_gamma[0];
        if (pi == 0) {
            rep.rows.assign(row.size(), {});
            for (size_t si = 0; si < row.size(); ++si) {
                rep.rows[si].site = row[si].site;
                rep.rows[si].n_k = row[si].n_k;
                rep.rows[si].gamma = row[si].gamma;
                rep.rows[si].gamma_se = row[si].gamma_se;
            }
        } else {
            for (size_t si = 0; si < row.size(); ++si)
                if (row[si].gamma > rep.rows[si].gamma) {
                    rep.rows[si].gamma = row[si].gamma;
                    rep.rows[si].gamma_se = row[si].gamma_se;
                }
        }
    }

    std::vector<int> nk;
    std::vector<double> lg, lg_se;
    for (const auto& r : rep.rows) {
        if (!(r.gamma > 0) || r.gamma <= r.gamma_se) continue;
        nk.push_back(r.n_k);
        lg.push_back(std::log(r.gamma));
        lg_se.push_back(r.gamma_se / r.gamma);
    }
    rep.fit_rows = nk.size();
    if (nk.size() >= 3) {
        std::vector<double> nkd(nk.begin(), nk.end());
        rep.spearman = spearman_rho(nkd, lg);
        std::vector<double> w(nk.size());
        for (size_t i = 0; i < w.size(); ++i) w[i] = lg_se[i] > 0 ? 1.0 / (lg_se[i] * lg_se[i]) : 1e12;
        rep.envelope = fit_line(nkd, lg, w);

        // golden-section on logC over a wide bracket
        double a = -14.0, b = 6.0;
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
        double f1 = shape_sse(c1, nk, lg, t, nullptr), f2 = shape_sse(c2, nk, lg, t, nullptr);
        for (int it = 0; it < 160; ++it) {
            if (f1 < f2) {
                b = c2; c2 = c1; f2 = f1;
                c1 = b - gr * (b - a);
                f1 = shape_sse(c1, nk, lg, t, nullptr);
            } else {
                a = c1; c1 = c2; f1 = f2;
                c2 = a + gr * (b - a);
                f2 = shape_sse(c2, nk, lg, t, nullptr);
            }
        }
        double logC = 0.5 * (a + b);
        shape_sse(logC, nk, lg, t, &rep.shape_offset);
        rep.shape_C = std::exp(logC);
    }
    return rep;
}

CauchyReport volume_cauchy(const LatticeModel& m1, const LatticeModel& m2,
                           const CylinderObservable& f, double t,
                           const std::vector<Configuration>& probes, const SemigroupConfig& cfg) {
    if (probes.empty()) throw std::invalid_argument("probe set is empty");
    if (m1.box.lo != m2.box.lo || m1.box.hi != m2.box.hi)
        throw std::invalid_argument("interaction-set pair must share the simulation box");
    if (m1.site.name != m2.site.name || m1.beta != m2.beta || m1.range != m2.range)
        throw std::invalid_argument("interaction-set pair must share the site dynamics");
    std::vector<std::vector<int>> extra;
    for (const auto& s : m2.lambda)
        if (!m1.interacting[m1.box.index(s)]) extra.push_back(s);
    for (const auto& s : m1.lambda)
        if (!m2.interacting[m2.box.index(s)])
            throw std::invalid_argument("first interaction set must be contained in the second");

    auto loc = f.localization();
    for (const auto& s : loc)
        if (!m1.interacting[m1.box.index(s)])
            throw std::invalid_argument("cylinder observable must localize inside the smaller set");

    CauchyReport rep;
    rep.n_bar = extra.empty() ? 0
                              : [&] {
                                    int best = INT32_MAX;
                                    for (const auto& s : extra)
                                        best = std::min(best, dist_to_set(s, loc));
                                    return best / std::max(m1.range, 1);
                                }();

    LatticeSystem s1(m1), s2(m2);
    for (size_t pi = 0; pi < probes.size(); ++pi) {
        std::vector<double> x0 = flatten_state(m1, probes[pi]);
        SemigroupConfig pc = cfg;
        pc.salt = cfg.salt + static_cast<uint32_t>(pi);
        auto run_one = [&](const LatticeSystem& sys) {
            return run_ensemble(
                sys, pc.ensemble(), {x0}, {}, {t}, 2,
                [&](size_t, size_t, const BundleView& v, double* out) {
                    out[0] = eval_cylinder(f, m1, v.state(0));
                    out[1] = 1.0;
                },
                /*store_raw=*/true);
        };
        auto r1 = run_one(s1);
        auto r2 = run_one(s2);

        MomentStats diff;
        for (size_t p = 0; p < pc.n_paths; ++p) {
            const double* a = r1.raw.data() + p * 2;
            const double* b = r2.raw.data() + p * 2;
            if (a[1] != 1.0 || b[1] != 1.0) continue;
            double d = a[0] - b[0];
            diff.n += 1;
            diff.sum += d;
            diff.sum_sq += d * d;
        }
        double lost = static_cast<double>(pc.n_paths - diff.n);
        if (lost > cfg.blowup_quota * static_cast<double>(pc.n_paths))
            throw BlowupError(std::max(r1.first_blown_path, r2.first_blown_path),
                              std::max(r1.first_blown_step, r2.first_blown_step),
                              static_cast<size_t>(lost), pc.n_paths);

        CauchyRow row;
        row.probe = pi;
        row.diff = diff.mean();
        row.se = diff.std_err();
        row.n = diff.n;
        if (std::abs(row.diff) > rep.max_abs_diff) {
            rep.max_abs_diff = std::abs(row.diff);
            rep.se_at_max = row.se;
        }
        rep.rows.push_back(row);
    }
    return rep;
}

ErgodicityReport ergodicity_decay(const LatticeModel& model, const LatticeSystem& sys,
                                  const CylinderObservable& f, const Configuration& omega,
                                  const Configuration& omega_tilde,
                                  const std::vector<double>& t_grid, const SemigroupConfig& cfg) {
    std::vector<double> xa = flatten_state(model, omega);
    std::vector<double> xb = flatten_state(model, omega_tilde);

    auto res = run_ensemble(
        sys, cfg.ensemble(), {xa, xb}, {}, t_grid, 1,
        [&](size_t, size_t, const BundleView& v, double* out) {
            out[0] = eval_cylinder(f, model, v.state(0)) - eval_cylinder(f, model, v.state(1));
        });
    double quota = cfg.blowup_quota * static_cast<double>(res.n_paths);
    if (static_cast<double>(res.blown_paths) > quota)
        throw BlowupError(res.first_blown_path, res.first_blown_step, res.blown_paths, res.n_paths);

    ErgodicityReport rep;
    for (size_t gi = 0; gi < res.times.size(); ++gi) {
        EstimatorResult r;
        r.time = res.times[gi];
        r.value = res.mean(gi, 0);
        r.std_err = res.std_err(gi, 0);
        r.n_paths = res.cells[gi][0].n_ok;
        rep.diff.push_back(r);
    }

    std::vector<double> ts, lg, w;
    for (const auto& r : rep.diff) {
        if (!(r.time > 0)) continue;
        if (std::abs(r.value) <= 3.0 * r.std_err || r.value == 0.0) {
            rep.converged_early = true;
            break;
        }
        ts.push_back(r.time);
        lg.push_back(std::log(std::abs(r.value)));
        double rse = r.std_err / std::abs(r.value);
        w.push_back(rse > 0 ? 1.0 / (rse * rse) : 1e12);
    }
    rep.fit_rows = ts.size();
    if (ts.size() >= 2) {
        rep.fit = fit_line(ts, lg, w);
        rep.rate = -rep.fit.slope;
        rep.rate_se = rep.fit.slope_se;
        rep.rate_positive_95 = rep.rate - 1.96 * rep.rate_se > 0;
    }
    return rep;
}

std::vector<int> gauge_weights(const Geometry& g) {
    std::vector<int> w(g.N);
    for (int p = 0; p < g.N; ++p) {
        std::vector<int> mono(g.N, 0);
        mono[p] = 1;
        Rational c = g.D.comp[p].coeff(mono);
        Poly rest = g.D.comp[p] - Poly::variable(g.N, p).scaled(c);
        if (!rest.is_constant() || !(rest.coeff(std::vector<int>(g.N, 0)) == Rational(0)))
            throw std::invalid_argument("gauge weights need a diagonal dilation field");
        double cd = c.to_double();
        int wi = static_cast<int>(std::llround(cd));
        if (wi < 1 || static_cast<double>(wi) != cd)
            throw std::invalid_argument("dilation weights must be positive integers");
        w[p] = wi;
    }
    return w;
}

double gauge_distance(const Geometry& g, std::span<const double> x) {
    std::vector<int> w = gauge_weights(g);
    double s = 0;
    for (int p = 0; p < g.N; ++p)
        s += std::pow(std::abs(x[p]), 1.0 / static_cast<double>(w[p]));
    return s;
}

OmegaReport omega_membership(const LatticeModel& m, const Configuration& omega, double zeta,
                             double bound) {
    if (!(zeta > m.dims()))
        throw std::invalid_argument("the weight exponent must exceed the lattice dimension");
    OmegaReport rep;
    rep.zeta = zeta;
    rep.bound = bound;
    std::vector<int> w = gauge_weights(m.site);
    for (const auto& [s, val] : omega.values) {
        if (!m.box.contains(s)) throw std::invalid_argument("configuration site outside the box");
        double d = 0;
        for (int p = 0; p < m.site_dim(); ++p)
            d += std::pow(std::abs(val[p]), 1.0 / static_cast<double>(w[p]));
        rep.sum += std::pow(1.0 + static_cast<double>(l1_norm(s)), -zeta) * d;
    }
    rep.member = rep.sum < bound;
    return rep;
}

} // namespace hypo
