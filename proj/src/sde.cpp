#include "hypocoerce/sde.hpp"

#include "hypocoerce/constants.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace hypo {

namespace {

// accumulates double-weighted rational polynomials term by term
struct PolyAccum {
    int nvars;
    std::map<std::vector<int>, double> terms;

    explicit PolyAccum(int nv) : nvars(nv) {}

    void add(const Poly& p, double w) {
        if (w == 0.0) return;
        for (const auto& [mono, c] : p.terms()) terms[mono] += w * c.to_double();
    }

    CompiledPoly build() const {
        CompiledPoly cp;
        cp.nvars = nvars;
        for (const auto& [mono, c] : terms) {
            if (c == 0.0) continue;
            cp.terms.push_back({c, mono});
        }
        return cp;
    }
};

CompiledPoly compiled_partial(const CompiledPoly& p, int q) {
    CompiledPoly d;
    d.nvars = p.nvars;
    for (const auto& t : p.terms) {
        if (t.e[q] == 0) continue;
        CompiledPoly::Term nt;
        nt.c = t.c * t.e[q];
        nt.e = t.e;
        nt.e[q] -= 1;
        d.terms.push_back(std::move(nt));
    }
    return d;
}

void finish_jacobian(CompiledField& f) {
    f.jac.resize(static_cast<size_t>(f.dim) * f.dim);
    for (int p = 0; p < f.dim; ++p)
        for (int q = 0; q < f.dim; ++q)
            f.jac[static_cast<size_t>(p) * f.dim + q] = compiled_partial(f.comp[p], q);
}

} // namespace

CompiledPoly CompiledPoly::from(const Poly& p, double scale) {
    PolyAccum acc(p.nvars());
    acc.add(p, scale);
    return acc.build();
}

CompiledField CompiledField::from(const VectorField& f, double scale) {
    CompiledField cf;
    cf.dim = f.dim;
    cf.comp.reserve(f.dim);
    for (int p = 0; p < f.dim; ++p) cf.comp.push_back(CompiledPoly::from(f.comp[p], scale));
    finish_jacobian(cf);
    return cf;
}

CompiledField CompiledField::combo(int dim,
                                   const std::vector<std::pair<double, const VectorField*>>& parts) {
    CompiledField cf;
    cf.dim = dim;
    for (int p = 0; p < dim; ++p) {
        PolyAccum acc(dim);
        for (const auto& [w, f] : parts) {
            if (f->dim != dim) throw std::invalid_argument("field arity mismatch in combination");
            acc.add(f->comp[p], w);
        }
        cf.comp.push_back(acc.build());
    }
    finish_jacobian(cf);
    return cf;
}

Scheme scheme_by_name(const std::string& name) {
    if (name == "heun" || name == "heun_strat") return Scheme::heun_strat;
    if (name == "euler" || name == "euler_ito") return Scheme::euler_ito;
    throw std::invalid_argument("unknown scheme '" + name + "' (expected heun or euler)");
}

std::string scheme_name(Scheme s) {
    return s == Scheme::heun_strat ? "heun" : "euler";
}

SdeSystem assemble_sde(const ModelSpec& model) {
    model.validate();
    const Geometry& g = model.geom;
    DeltaReport d = delta_of_G(model.G);
    if (d.delta <= 0.0)
        throw std::domain_error("I + G_sym is not positive definite; the diffusion square root does not exist");

    Mat gs = sym_part(model.G), ga = asym_part(model.G);
    Mat ip_gs = gs;
    for (int i = 0; i < ip_gs.rows; ++i) ip_gs(i, i) += 1.0;
    Mat B = sqrt_spd(ip_gs);

    SdeSystem sys;
    sys.n_dim = g.N;
    sys.n_channels = g.m;

    // -beta D + (1/2) sum_ij Ga_ij [X_i, X_j]
    std::vector<VectorField> bracket_store;
    bracket_store.reserve(static_cast<size_t>(g.m) * g.m);
    std::vector<std::pair<double, const VectorField*>> base_parts;
    base_parts.push_back({-model.beta, &g.D});
    for (int i = 0; i < g.m; ++i)
        for (int j = 0; j < g.m; ++j) {
            double w = 0.5 * ga(i, j);
            if (w == 0.0) continue;
            bracket_store.push_back(lie_bracket(g.Z[i], g.Z[j]));
            base_parts.push_back({w, &bracket_store.back()});
        }
    sys.drift_base = CompiledField::combo(g.N, base_parts);

    // sum_jj' (I + Gs)_jj' grad_{X_j} X_j'
    std::vector<VectorField> conn_store;
    conn_store.reserve(static_cast<size_t>(g.m) * g.m);
    std::vector<std::pair<double, const VectorField*>> conn_parts;
    for (int j = 0; j < g.m; ++j)
        for (int jp = 0; jp < g.m; ++jp) {
            double w = ip_gs(j, jp);
            if (w == 0.0) continue;
            VectorField grad(g.N);
            bool nonzero = false;
            for (int p = 0; p < g.N; ++p) {
                grad.comp[p] = g.Z[j].apply(g.Z[jp].comp[p]);
                nonzero = nonzero || !grad.comp[p].is_zero();
            }
            if (!nonzero) continue;
            conn_store.push_back(std::move(grad));
            conn_parts.push_back({w, &conn_store.back()});
        }
    sys.ito_shift = CompiledField::combo(g.N, conn_parts);

    const double sq2 = std::sqrt(2.0);
    for (int i = 0; i < g.m; ++i) {
        std::vector<std::pair<double, const VectorField*>> col;
        for (int j = 0; j < g.m; ++j) {
            double w = sq2 * B(j, i);
            if (w != 0.0) col.push_back({w, &g.Z[j]});
        }
        sys.diff_col.push_back(CompiledField::combo(g.N, col));
    }

    sys.has_alpha = !model.alpha.is_zero();
    if (sys.has_alpha) {
        sys.alpha = model.alpha.funcs;
        sys.alpha_grad.resize(g.m);
        for (int i = 0; i < g.m; ++i) {
            sys.gen_col.push_back(CompiledField::from(g.Z[i]));
            sys.alpha_grad[i].resize(g.N);
            for (int q = 0; q < g.N; ++q)
                sys.alpha_grad[i][q] = sys.alpha[i].empty()
                                           ? obs::constant(g.N, 0.0)
                                           : sys.alpha[i].diff(q);
        }
    }
    return sys;
}

std::vector<double> flow_exp(const CompiledField& f, std::span<const double> x, double h) {
    if (std::abs(h) > 0.1) throw std::invalid_argument("flow step |h| must be <= 0.1");
    if (static_cast<int>(x.size()) != f.dim) throw std::invalid_argument("point arity mismatch");
    int n = std::max(1, static_cast<int>(std::ceil(std::abs(h) / 0.005)));
    double hs = h / n;
    std::vector<double> y(x.begin(), x.end());
    std::vector<double> k1(f.dim), k2(f.dim), k3(f.dim), k4(f.dim), tmp(f.dim);
    auto eval = [&](const std::vector<double>& p, std::vector<double>& out) {
        std::fill(out.begin(), out.end(), 0.0);
        f.add_eval(p.data(), 1.0, out.data());
    };
    for (int s = 0; s < n; ++s) {
        eval(y, k1);
        for (int i = 0; i < f.dim; ++i) tmp[i] = y[i] + 0.5 * hs * k1[i];
        eval(tmp, k2);
        for (int i = 0; i < f.dim; ++i) tmp[i] = y[i] + 0.5 * hs * k2[i];
        eval(tmp, k3);
        for (int i = 0; i < f.dim; ++i) tmp[i] = y[i] + hs * k3[i];
        eval(tmp, k4);
        for (int i = 0; i < f.dim; ++i)
            y[i] += hs / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return y;
}

std::vector<double> flow_exp(const VectorField& f, std::span<const double> x, double h) {
    return flow_exp(CompiledField::from(f), x, h);
}

} // namespace hypo
