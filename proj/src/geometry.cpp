#include "hypocoerce/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace hypo {

namespace {

Poly zero_p(int n) { return Poly(n); }
Poly one_p(int n) { return Poly::constant(n, Rational(1)); }

VectorField unit_field(int n, int i) {
    VectorField v(n);
    v.comp[i] = one_p(n);
    return v;
}

} // namespace

double Geometry::lambda_star() const { return lambda_star_exact().to_double(); }

Rational Geometry::lambda_star_exact() const {
    Rational m = lambda.at(0);
    for (const auto& l : lambda)
        if (l < m) m = l;
    return m;
}

void Geometry::validate() const {
    if (static_cast<int>(Z.size()) != n || m > n || m < 1)
        throw std::invalid_argument(name + ": inconsistent frame sizes");
    for (const auto& z : Z)
        if (z.dim != N) throw std::invalid_argument(name + ": field arity mismatch");

    StructureResult sr = structure_constants(Z, m);
    if (!sr.ok())
        throw std::invalid_argument(name + ": bracket [Z_" + std::to_string(sr.failed_k + 1) +
                                    ", X_" + std::to_string(sr.failed_j + 1) +
                                    "] leaves the constant-coefficient span");
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < m; ++j)
            for (int l = 0; l < n; ++l)
                if (sr.tensor->at(k, j, l) != c.at(k, j, l))
                    throw std::invalid_argument(name + ": stored structure constants disagree with the fields");

    DilationResult dr = dilation_eigenvalues(Z, D);
    if (!dr.ok())
        throw std::invalid_argument(name + ": [Z_" + std::to_string(dr.failed_k + 1) +
                                    ", D] is not a positive multiple of Z_" + std::to_string(dr.failed_k + 1));
    if (*dr.lambda != lambda)
        throw std::invalid_argument(name + ": stored dilation eigenvalues disagree with the fields");
}

Geometry heisenberg() {
    Geometry g;
    g.name = "heisenberg";
    g.N = 3; g.m = 2; g.n = 3;

    Poly x = Poly::variable(3, 0), y = Poly::variable(3, 1), z = Poly::variable(3, 2);

    VectorField x1(3);
    x1.comp[0] = one_p(3);
    x1.comp[2] = y.scaled(Rational(-1, 2));
    VectorField x2(3);
    x2.comp[1] = one_p(3);
    x2.comp[2] = x.scaled(Rational(1, 2));
    VectorField z3 = unit_field(3, 2);
    g.Z = {x1, x2, z3};

    g.D = VectorField(3);
    g.D.comp[0] = x;
    g.D.comp[1] = y;
    g.D.comp[2] = z.scaled(Rational(2));
    g.lambda = {Rational(1), Rational(1), Rational(2)};

    g.c = StructureTensor(3, 2);
    g.c.at(0, 1, 2) = Rational(1);   // [Z_1, X_2] = Z_3
    g.c.at(1, 0, 2) = Rational(-1);  // [Z_2, X_1] = -Z_3
    g.validate();
    return g;
}

Geometry grusin() {
    Geometry g;
    g.name = "grusin";
    g.N = 2; g.m = 2; g.n = 3;

    Poly x = Poly::variable(2, 0), y = Poly::variable(2, 1);

    VectorField x1 = unit_field(2, 0);
    VectorField x2(2);
    x2.comp[1] = x;
    VectorField z3 = unit_field(2, 1);
    g.Z = {x1, x2, z3};

    g.D = VectorField(2);
    g.D.comp[0] = x;
    g.D.comp[1] = y.scaled(Rational(2));
    g.lambda = {Rational(1), Rational(1), Rational(2)};

    g.c = StructureTensor(3, 2);
    g.c.at(0, 1, 2) = Rational(1);
    g.c.at(1, 0, 2) = Rational(-1);
    g.validate();
    return g;
}

Geometry martinet() {
    Geometry g;
    g.name = "martinet";
    g.N = 3; g.m = 2; g.n = 4;

    Poly x = Poly::variable(3, 0), y = Poly::variable(3, 1), z = Poly::variable(3, 2);

    VectorField x1(3);
    x1.comp[0] = one_p(3);
    x1.comp[2] = -(y * y);
    VectorField x2 = unit_field(3, 1);
    VectorField z3(3);
    z3.comp[2] = y.scaled(Rational(2));   // [X_1, X_2]
    VectorField z4(3);
    z4.comp[2] = Poly::constant(3, Rational(-2));  // [Z_3, X_2]
    g.Z = {x1, x2, z3, z4};

    g.D = VectorField(3);
    g.D.comp[0] = x;
    g.D.comp[1] = y;
    g.D.comp[2] = z.scaled(Rational(3));
    g.lambda = {Rational(1), Rational(1), Rational(2), Rational(3)};

    g.c = StructureTensor(4, 2);
    g.c.at(0, 1, 2) = Rational(1);   // [Z_1, X_2] = Z_3
    g.c.at(1, 0, 2) = Rational(-1);  // [Z_2, X_1] = -Z_3
    g.c.at(2, 1, 3) = Rational(1);   // [Z_3, X_2] = Z_4
    g.validate();
    return g;
}

Geometry abelian(int n) {
    if (n < 1) throw std::invalid_argument("abelian dimension must be positive");
    Geometry g;
    g.name = "abelian:" + std::to_string(n);
    g.N = n; g.m = n; g.n = n;
    for (int i = 0; i < n; ++i) g.Z.push_back(unit_field(n, i));
    g.D = VectorField(n);
    for (int i = 0; i < n; ++i) g.D.comp[i] = Poly::variable(n, i);
    g.lambda.assign(n, Rational(1));
    g.c = StructureTensor(n, n);
    g.validate();
    return g;
}

Geometry geometry_by_name(const std::string& name) {
    if (name == "heisenberg") return heisenberg();
    if (name == "grusin") return grusin();
    if (name == "martinet") return martinet();
    if (name == "abelian") return abelian(1);
    if (name.rfind("abelian:", 0) == 0) {
        int n = std::stoi(name.substr(8));
        return abelian(n);
    }
    throw std::invalid_argument("unknown geometry '" + name + "'");
}

HTypeGauge::HTypeGauge(int m_) : m(m_) {
    if (m < 2 || m % 2 != 0) throw std::invalid_argument("gauge needs an even number of generators");
}

namespace {

struct GaugePoint {
    double xx;   // |x|^2
    double t;
    double n;    // gauge value
    double n3;   // n^3
    double n7;
};

GaugePoint resolve(std::span<const double> p, int m) {
    GaugePoint g;
    g.xx = 0;
    for (int i = 0; i < m; ++i) g.xx += p[i] * p[i];
    g.t = p[m];
    g.n = std::pow(g.xx * g.xx + 16.0 * g.t * g.t, 0.25);
    g.n3 = g.n * g.n * g.n;
    g.n7 = g.n3 * g.n3 * g.n;
    return g;
}

} // namespace

double HTypeGauge::value(std::span<const double> p) const { return resolve(p, m).n; }

double HTypeGauge::pair_weight(std::span<const double> p, int i) const {
    // symplectic pairing (1,2),(3,4),...: X_i = d/dx_i -+ (x_pair/2) d/dt
    if (i % 2 == 0) return -0.5 * p[i + 1];
    return 0.5 * p[i - 1];
}

double HTypeGauge::xi_n(std::span<const double> p, int i) const {
    GaugePoint g = resolve(p, m);
    double nx = g.xx * p[i] / g.n3;
    double nt = 8.0 * g.t / g.n3;
    return nx + pair_weight(p, i) * nt;
}

double HTypeGauge::xixj_n(std::span<const double> p, int i, int j) const {
    GaugePoint g = resolve(p, m);
    auto nxx = [&](int a, int b) {
        return (2.0 * p[a] * p[b] + (a == b ? g.xx : 0.0)) / g.n3 -
               3.0 * g.xx * g.xx * p[a] * p[b] / g.n7;
    };
    auto nxt = [&](int a) { return -24.0 * g.xx * p[a] * g.t / g.n7; };
    double ntt = 8.0 / g.n3 - 192.0 * g.t * g.t / g.n7;
    double nt = 8.0 * g.t / g.n3;

    double wi = pair_weight(p, i), wj = pair_weight(p, j);
    // X_i applied to w_j: w_j depends on the paired coordinate only
    double xiwj = 0.0;
    int pair_j = (j % 2 == 0) ? j + 1 : j - 1;
    if (i == pair_j) xiwj = (j % 2 == 0) ? -0.5 : 0.5;

    return nxx(j, i) + wi * nxt(j) + wj * nxt(i) + wi * wj * ntt + xiwj * nt;
}

double HTypeGauge::xi2_n(std::span<const double> p, int i) const { return xixj_n(p, i, i); }

double HTypeGauge::dilation_n(std::span<const double> p) const {
    GaugePoint g = resolve(p, m);
    double s = 0;
    for (int i = 0; i < m; ++i) s += p[i] * (g.xx * p[i] / g.n3);
    s += 2.0 * g.t * (8.0 * g.t / g.n3);
    return s;
}

HTypeGauge::Identities HTypeGauge::identities(std::span<const double> p) const {
    Identities id;
    id.value = value(p);
    id.subgrad = 0;
    id.sublap = 0;
    for (int i = 0; i < m; ++i) {
        double xn = xi_n(p, i);
        id.subgrad += xn * xn;
        id.sublap += xi2_n(p, i);
    }
    id.dilation = dilation_n(p);
    return id;
}

// g(x) = 16u^3 - 23u^4 + 9u^5 on [1,2] with u = x-1; the complement
// x - g = (1-u)^3 (9u^2 + 4u + 1) is nonnegative, so 0 <= g <= x, and
// g' = u^2 (48 - 92u + 45u^2) > 0 keeps it monotone.
double CutoffRho::g(double x) {
    if (x <= 1.0) return 0.0;
    if (x >= 2.0) return x;
    double u = x - 1.0;
    return ((9.0 * u - 23.0) * u + 16.0) * u * u * u;
}

double CutoffRho::dg(double x) {
    if (x <= 1.0) return 0.0;
    if (x >= 2.0) return 1.0;
    double u = x - 1.0;
    return ((45.0 * u - 92.0) * u + 48.0) * u * u;
}

double CutoffRho::d2g(double x) {
    if (x <= 1.0 || x >= 2.0) return 0.0;
    double u = x - 1.0;
    return ((180.0 * u - 276.0) * u + 96.0) * u;
}

GaugeDerivs cutoff_derivs(const HTypeGauge& gauge, std::span<const double> p, const double* gmat) {
    GaugeDerivs d{0.0, 0.0, 0.0};
    double nval = gauge.value(p);
    if (nval <= 1.0) return d;  // rho vanishes with two derivatives below the gauge ball
    d.rho = CutoffRho::g(nval);
    double g1 = CutoffRho::dg(nval), g2 = CutoffRho::d2g(nval);
    int m = gauge.m;
    std::vector<double> xn(m);
    for (int i = 0; i < m; ++i) {
        xn[i] = gauge.xi_n(p, i);
        d.subgrad += g1 * g1 * xn[i] * xn[i];
        d.sublap += g2 * xn[i] * xn[i] + g1 * gauge.xi2_n(p, i);
    }
    if (gmat) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                double w = gmat[i * m + j];
                if (w == 0.0) continue;
                d.sublap += w * (g2 * xn[i] * xn[j] + g1 * gauge.xixj_n(p, i, j));
            }
    }
    return d;
}

} // namespace hypo
