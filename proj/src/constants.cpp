#include "hypocoerce/constants.hpp"

#include <cmath>
#include <stdexcept>

namespace hypo {

DeltaReport delta_of_G(const Mat& G) {
    if (G.rows != G.cols) throw std::invalid_argument("coupling matrix must be square");
    Mat a = sym_part(G);
    for (int i = 0; i < a.rows; ++i) a(i, i) += 1.0;
    SymEig e = sym_eig(a);
    return {e.values.front(), e.residual};
}

namespace {

bool is_zero_matrix(const Mat& G) {
    for (double v : G.a)
        if (v != 0.0) return false;
    return true;
}

bool all_zero(const std::vector<double>& v) {
    for (double x : v)
        if (x != 0.0) return false;
    return true;
}

bool alpha_bounds_vanish(const AlphaSpec& a) {
    if (!all_zero(a.sup_alpha)) return false;
    for (const auto& row : a.sup_Zalpha)
        if (!all_zero(row)) return false;
    return true;
}

// max_k sum_{n',i,j,l} |G_ij + delta_ij| (|c_kil||c_ljn'| + |c_n'il||c_ljk|)
double bracket_constant_C1(const StructureTensor& c, const Mat& G) {
    int n = c.n, m = c.m;
    double best = 0;
    for (int k = 0; k < n; ++k) {
        double s = 0;
        for (int np = 0; np < n; ++np)
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) {
                    double w = std::abs(G(i, j) + (i == j ? 1.0 : 0.0));
                    if (w == 0.0) continue;
                    for (int l = 0; l < n; ++l) {
                        double t = std::abs(c.at(k, i, l).to_double()) * std::abs(c.at(l, j, np).to_double()) +
                                   std::abs(c.at(np, i, l).to_double()) * std::abs(c.at(l, j, k).to_double());
                        s += w * t;
                    }
                }
        best = std::max(best, s);
    }
    return best;
}

Rational bracket_constant_C1_exact(const StructureTensor& c) {
    int n = c.n, m = c.m;
    Rational best(0);
    for (int k = 0; k < n; ++k) {
        Rational s(0);
        for (int np = 0; np < n; ++np)
            for (int i = 0; i < m; ++i)
                for (int l = 0; l < n; ++l)
                    s += c.at(k, i, l).abs() * c.at(l, i, np).abs() +
                         c.at(np, i, l).abs() * c.at(l, i, k).abs();
        if (s > best) best = s;
    }
    return best;
}

// max_k sum_{i,l} ||alpha_i|| (|c_kil| + |c_lik|)
double drift_constant_C2(const StructureTensor& c, const std::vector<double>& sup_alpha) {
    int n = c.n, m = c.m;
    double best = 0;
    for (int k = 0; k < n; ++k) {
        double s = 0;
        for (int i = 0; i < m; ++i)
            for (int l = 0; l < n; ++l)
                s += sup_alpha[i] * (std::abs(c.at(k, i, l).to_double()) +
                                     std::abs(c.at(l, i, k).to_double()));
        best = std::max(best, s);
    }
    return best;
}

// 2 sum_{k,l,j} [sum_i (delta_ij + Gsym_ij) c_kil]^2
double quadratic_constant_C3(const StructureTensor& c, const Mat& G) {
    int n = c.n, m = c.m;
    Mat gs = sym_part(G);
    double s = 0;
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
            for (int j = 0; j < m; ++j) {
                double inner = 0;
                for (int i = 0; i < m; ++i)
                    inner += ((i == j ? 1.0 : 0.0) + gs(i, j)) * c.at(k, i, l).to_double();
                s += inner * inner;
            }
    return 2.0 * s;
}

Rational quadratic_constant_C3_exact(const StructureTensor& c) {
    Rational s(0);
    for (int k = 0; k < c.n; ++k)
        for (int j = 0; j < c.m; ++j)
            for (int l = 0; l < c.n; ++l)
                s += c.at(k, j, l) * c.at(k, j, l);
    return Rational(2) * s;
}

double eta_constant(const AlphaSpec& a) {
    if (a.sup_Zalpha.empty()) return 0;
    int n = static_cast<int>(a.sup_Zalpha.size());
    int m = static_cast<int>(a.sup_alpha.size());
    double max_k = 0, max_i = 0;
    for (int k = 0; k < n; ++k) {
        double s = 0;
        for (int i = 0; i < m; ++i) s += a.sup_Zalpha[k][i];
        max_k = std::max(max_k, s);
    }
    for (int i = 0; i < m; ++i) {
        double s = 0;
        for (int k = 0; k < n; ++k) s += a.sup_Zalpha[k][i];
        max_i = std::max(max_i, s);
    }
    return max_k + max_i;
}

// the alternative pairing constant C1' = 2 sum c_{kjl}^2
Rational pairing_alt_exact(const StructureTensor& c) { return quadratic_constant_C3_exact(c); }

KappaReport kappa_impl(const ModelSpec& model, bool optimal) {
    model.validate();
    const Geometry& g = model.geom;

    KappaReport r;
    r.beta = model.beta;
    r.lambda_star = g.lambda_star();
    DeltaReport d = delta_of_G(model.G);
    if (d.delta <= 0.0)
        throw std::domain_error("I + G_sym is not positive definite (delta <= 0)");
    r.delta = d.delta;
    r.delta_residual = d.residual;

    r.C1 = bracket_constant_C1(g.c, model.G);
    r.C2 = drift_constant_C2(g.c, model.alpha.sup_alpha);
    r.C3 = quadratic_constant_C3(g.c, model.G);
    r.eta = eta_constant(model.alpha);

    if (optimal) {
        double alt = pairing_alt_exact(g.c).to_double();
        r.C1_alt = alt;
        r.C1 = std::min(r.C1, alt);
    }

    double total = r.C1 + r.C2 + r.eta + r.C3 / r.delta;
    r.kappa = 2.0 * model.beta * r.lambda_star - total;
    r.beta_threshold = total / (2.0 * r.lambda_star);

    if (is_zero_matrix(model.G) && alpha_bounds_vanish(model.alpha)) {
        ExactKappa ex;
        Rational c1 = bracket_constant_C1_exact(g.c);
        Rational c3 = quadratic_constant_C3_exact(g.c);
        if (optimal) {
            Rational alt = pairing_alt_exact(g.c);
            if (alt < c1) c1 = alt;
        }
        Rational ls = g.lambda_star_exact();
        ex.slope = Rational(2) * ls;
        ex.intercept = -(c1 + c3);
        ex.threshold = (c1 + c3) / ex.slope;
        r.exact = ex;
    }
    return r;
}

} // namespace

KappaReport kappa(const ModelSpec& model) { return kappa_impl(model, false); }

KappaReport kappa_optimal(const ModelSpec& model) { return kappa_impl(model, true); }

PointwiseModel PointwiseModel::from_model(const ModelSpec& model) {
    const Geometry& g = model.geom;
    PointwiseModel pm;
    pm.n = g.n;
    pm.m = g.m;
    pm.ambient = g.N;
    pm.X.assign(g.Z.begin(), g.Z.begin() + g.m);
    pm.c.reserve(static_cast<size_t>(g.n) * g.m * g.n);
    for (int k = 0; k < g.n; ++k)
        for (int j = 0; j < g.m; ++j)
            for (int l = 0; l < g.n; ++l)
                pm.c.push_back(Poly::constant(g.N, g.c.at(k, j, l)));
    pm.lambda_star = g.lambda_star();
    pm.beta = model.beta;
    pm.G = model.G;
    pm.sup_alpha = model.alpha.sup_alpha;
    pm.sup_Zalpha = model.alpha.sup_Zalpha;
    return pm;
}

PointwiseKappa kappa_pointwise(const PointwiseModel& pm, std::span<const double> x) {
    int n = pm.n, m = pm.m;
    std::vector<double> cv(static_cast<size_t>(n) * m * n);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < m; ++j)
            for (int l = 0; l < n; ++l)
                cv[(static_cast<size_t>(k) * m + j) * n + l] = pm.at(k, j, l).eval(x);
    auto at = [&](int k, int j, int l) { return cv[(static_cast<size_t>(k) * m + j) * n + l]; };

    PointwiseKappa r{};
    DeltaReport d = delta_of_G(pm.G);
    if (d.delta <= 0.0)
        throw std::domain_error("I + G_sym is not positive definite (delta <= 0)");
    r.delta = d.delta;
    Mat gs = sym_part(pm.G);

    for (int k = 0; k < n; ++k) {
        double s = 0;
        for (int np = 0; np < n; ++np)
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) {
                    double w = std::abs(pm.G(i, j) + (i == j ? 1.0 : 0.0));
                    if (w == 0.0) continue;
                    for (int l = 0; l < n; ++l)
                        s += w * (std::abs(at(k, i, l)) * std::abs(at(l, j, np)) +
                                  std::abs(at(np, i, l)) * std::abs(at(l, j, k)));
                }
        r.C1 = std::max(r.C1, s);
    }

    for (int k = 0; k < n; ++k) {
        double s = 0;
        for (int i = 0; i < m; ++i)
            for (int l = 0; l < n; ++l)
                s += pm.sup_alpha.at(i) * (std::abs(at(k, i, l)) + std::abs(at(l, i, k)));
        r.C2 = std::max(r.C2, s);
    }

    double c3 = 0;
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
            for (int j = 0; j < m; ++j) {
                double inner = 0;
                for (int i = 0; i < m; ++i)
                    inner += ((i == j ? 1.0 : 0.0) + gs(i, j)) * at(k, i, l);
                c3 += inner * inner;
            }
    r.C3 = 2.0 * c3;

    for (int k = 0; k < n; ++k) {
        double s = 0;
        for (int j = 0; j < m; ++j)
            for (int l = 0; l < n; ++l)
                s += std::abs(pm.X[j].apply(pm.at(k, j, l)).eval(x)) +
                     std::abs(pm.X[j].apply(pm.at(l, j, k)).eval(x));
        r.C4 = std::max(r.C4, s);
    }

    AlphaSpec tmp;
    tmp.sup_alpha = pm.sup_alpha;
    tmp.sup_Zalpha = pm.sup_Zalpha;
    r.eta = eta_constant(tmp);

    r.kappa = 2.0 * pm.beta * pm.lambda_star - r.C1 - r.C2 - r.eta - r.C3 / r.delta - r.C4;
    return r;
}

LqReport kappa_q(const Geometry& g, double beta, double q) {
    if (!(q > 1.0)) throw std::domain_error("L^q rate needs q > 1");
    const StructureTensor& c = g.c;
    int n = c.n, m = c.m;

    double max_k = 0, max_mp = 0;
    for (int k = 0; k < n; ++k) {
        double s = 0;
        for (int i = 0; i < m; ++i)
            for (int l = 0; l < n; ++l)
                for (int mp = 0; mp < n; ++mp)
                    s += std::abs(c.at(k, i, l).to_double() * c.at(l, i, mp).to_double());
        max_k = std::max(max_k, s);
    }
    for (int mp = 0; mp < n; ++mp) {
        double s = 0;
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < m; ++i)
                for (int l = 0; l < n; ++l)
                    s += std::abs(c.at(k, i, l).to_double() * c.at(l, i, mp).to_double());
        max_mp = std::max(max_mp, s);
    }

    double square_sum = 0;
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < m; ++i)
            for (int l = 0; l < n; ++l) {
                double v = c.at(k, i, l).to_double();
                square_sum += v * v;
            }

    LqReport r;
    r.q = q;
    r.beta = beta;
    r.pairing = 0.5 * max_k + 0.5 * max_mp;
    r.square_sum = square_sum;
    double ls = g.lambda_star();
    r.kappa_q = q * beta * ls - q * r.pairing - (q / (q - 1.0)) * square_sum;
    r.beta_threshold = r.pairing / ls + square_sum / ((q - 1.0) * ls);
    return r;
}

} // namespace hypo
