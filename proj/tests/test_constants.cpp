// Decay constants: frozen closed forms for the catalog, an independent
// re-computation of the tensor formulas, behavior under coupling matrices and
// bounded drift, the L^q rate, and the pointwise variant.
#include "hypocoerce/constants.hpp"
#include "hypocoerce/rng.hpp"

#include "doctest.h"

#include <cmath>

using namespace hypo;

namespace {

// Independent evaluation of kappa = 2 beta lambda_* - C1 - C2 - eta - C3/delta
// for G = 0, alpha = 0: only C1 and C3 survive, computed here with flat
// loops over the non-zero tensor entries (a different traversal than the
// library's per-k accumulation).
double kappa_brute(const Geometry& g, double beta) {
    struct Entry {
        int k, j, l;
        double v;
    };
    std::vector<Entry> nz;
    for (int k = 0; k < g.n; ++k)
        for (int j = 0; j < g.m; ++j)
            for (int l = 0; l < g.n; ++l) {
                double v = g.c.at(k, j, l).to_double();
                if (v != 0.0) nz.push_back({k, j, l, v});
            }

    // C1 = max_k sum_{n',i,l} |c_kil c_lin'| + |c_n'il c_lik|
    double C1 = 0;
    for (int k = 0; k < g.n; ++k) {
        double s = 0;
        for (const Entry& a : nz)
            for (const Entry& b : nz) {
                if (a.j != b.j) continue;  // same generator index i
                if (a.k == k && b.k == a.l) s += std::abs(a.v * b.v);  // c_kil c_lin'
                if (b.l == k && a.l == b.k) s += std::abs(a.v * b.v);  // c_n'il c_lik
            }
        C1 = std::max(C1, s);
    }

    double C3 = 0;
    for (const Entry& a : nz) C3 += a.v * a.v;
    C3 *= 2.0;

    return 2.0 * beta * g.lambda_star() - C1 - C3;
}

Mat mat2(double a, double b, double c, double d) {
    Mat m(2, 2);
    m(0, 0) = a;
    m(0, 1) = b;
    m(1, 0) = c;
    m(1, 1) = d;
    return m;
}

} // namespace

TEST_CASE("spectral floor of I + G_sym") {
    CHECK(delta_of_G(Mat(2, 2)).delta == doctest::Approx(1.0));
    // antisymmetric part does not move the floor
    CHECK(delta_of_G(mat2(0, 0.7, -0.7, 0)).delta == doctest::Approx(1.0));
    // strictly upper-triangular G: eigenvalues 1 +- 1/2
    CHECK(delta_of_G(mat2(0, 1, 0, 0)).delta == doctest::Approx(0.5));
    CHECK(delta_of_G(mat2(-0.25, 0, 0, 0)).delta == doctest::Approx(0.75));
}

TEST_CASE("frozen exact rates for the catalog") {
    SUBCASE("step-2 group: kappa = 2 beta - 4") {
        ModelSpec m = ModelSpec::plain(heisenberg(), 3.0);
        KappaReport r = kappa(m);
        CHECK(r.kappa == doctest::Approx(2.0));
        CHECK(r.C1 == doctest::Approx(0.0));
        CHECK(r.C2 == doctest::Approx(0.0));
        CHECK(r.C3 == doctest::Approx(4.0));
        CHECK(r.eta == doctest::Approx(0.0));
        CHECK(r.beta_threshold == doctest::Approx(2.0));
        REQUIRE(r.exact.has_value());
        CHECK(r.exact->slope == Rational(2));
        CHECK(r.exact->intercept == Rational(-4));
        CHECK(r.exact->threshold == Rational(2));
    }
    SUBCASE("flat family: kappa = 2 beta") {
        for (int n : {1, 2, 5}) {
            ModelSpec m = ModelSpec::plain(abelian(n), 1.25);
            KappaReport r = kappa(m);
            CHECK(r.kappa == doctest::Approx(2.5));
            CHECK(r.beta_threshold == doctest::Approx(0.0));
            REQUIRE(r.exact.has_value());
            CHECK(r.exact->slope == Rational(2));
            CHECK(r.exact->intercept == Rational(0));
        }
    }
    SUBCASE("degenerate-plane model shares the step-2 tensor") {
        KappaReport r = kappa(ModelSpec::plain(grusin(), 3.0));
        CHECK(r.kappa == doctest::Approx(2.0));
        REQUIRE(r.exact.has_value());
        CHECK(r.exact->intercept == Rational(-4));
    }
    SUBCASE("step-3 model: kappa = 2 beta - 7") {
        KappaReport r = kappa(ModelSpec::plain(martinet(), 4.0));
        CHECK(r.kappa == doctest::Approx(1.0));
        CHECK(r.C1 == doctest::Approx(1.0));
        CHECK(r.C3 == doctest::Approx(6.0));
        CHECK(r.beta_threshold == doctest::Approx(3.5));
        REQUIRE(r.exact.has_value());
        CHECK(r.exact->slope == Rational(2));
        CHECK(r.exact->intercept == Rational(-7));
        CHECK(r.exact->threshold == Rational(7, 2));
    }
}

TEST_CASE("library rates agree with an independent tensor traversal") {
    for (const Geometry& g : {heisenberg(), grusin(), martinet(), abelian(3)}) {
        CAPTURE(g.name);
        for (double beta : {0.5, 2.0, 3.7, 10.0}) {
            KappaReport r = kappa(ModelSpec::plain(g, beta));
            CHECK(r.kappa == doctest::Approx(kappa_brute(g, beta)).epsilon(1e-12));
        }
    }
}

TEST_CASE("kappa is increasing in beta with slope 2 lambda_*") {
    for (const Geometry& g : {heisenberg(), martinet()}) {
        KappaReport lo = kappa(ModelSpec::plain(g, 3.0));
        KappaReport hi = kappa(ModelSpec::plain(g, 5.0));
        CHECK(hi.kappa > lo.kappa);
        CHECK(hi.kappa - lo.kappa == doctest::Approx(2.0 * 2.0 * g.lambda_star()));
    }
}

TEST_CASE("coupling matrix enters through delta, C1 weights and C3") {
    Geometry g = heisenberg();
    SUBCASE("antisymmetric G leaves every constant unchanged") {
        ModelSpec m = ModelSpec::plain(g, 3.0);
        m.G = mat2(0, 0.8, -0.8, 0);
        KappaReport r = kappa(m);
        CHECK(r.delta == doctest::Approx(1.0));
        CHECK(r.kappa == doctest::Approx(2.0));
        CHECK(!r.exact.has_value());  // exact form reserved for G = 0
    }
    SUBCASE("symmetric multiple of the identity: closed form") {
        // G = s I: delta = 1+s, C3 = 2 (1+s)^2 sum c^2, C1 still 0
        double s = 0.5;
        ModelSpec m = ModelSpec::plain(g, 3.0);
        m.G = mat2(s, 0, 0, s);
        KappaReport r = kappa(m);
        CHECK(r.delta == doctest::Approx(1.5));
        CHECK(r.C3 == doctest::Approx(2.0 * (1 + s) * (1 + s) * 2.0));
        CHECK(r.kappa == doctest::Approx(2.0 * 3.0 - r.C3 / 1.5));
    }
    SUBCASE("indefinite coupling is rejected") {
        ModelSpec m = ModelSpec::plain(g, 3.0);
        m.G = mat2(-2.0, 0, 0, 0);
        CHECK_THROWS_AS(kappa(m), std::domain_error);
    }
}

TEST_CASE("bounded drift feeds C2 and eta") {
    Geometry g = heisenberg();
    ModelSpec m = ModelSpec::plain(g, 3.0);
    m.alpha = AlphaSpec::tanh_first(g, {0.2, 0.2});
    KappaReport r = kappa(m);
    // sup alpha = 0.2 per generator; only Z_1 has a nonvanishing first
    // component, so sup |Z_k alpha_i| = 0.2 delta_{k1}
    CHECK(r.C2 == doctest::Approx(0.4));
    CHECK(r.eta == doctest::Approx(0.6));
    CHECK(r.kappa == doctest::Approx(2.0 * 3.0 - 0.4 - 0.6 - 4.0));
    CHECK(!r.exact.has_value());

    // dropping the drift recovers the exact line
    m.alpha = AlphaSpec::zero(g);
    CHECK(kappa(m).exact.has_value());
}

TEST_CASE("optimal pairing can only improve the rate") {
    for (const Geometry& g : {heisenberg(), grusin(), martinet(), abelian(2)}) {
        CAPTURE(g.name);
        ModelSpec m = ModelSpec::plain(g, 4.0);
        KappaReport plain = kappa(m);
        KappaReport opt = kappa_optimal(m);
        REQUIRE(opt.C1_alt.has_value());
        CHECK(*opt.C1_alt == doctest::Approx(plain.C3));  // C1' = 2 sum c^2
        CHECK(opt.kappa >= plain.kappa - 1e-12);
        CHECK(opt.C1 == doctest::Approx(std::min(plain.C1, *opt.C1_alt)));
    }
}

TEST_CASE("lq rate: frozen anchors and the q > 1 guard") {
    Geometry h = heisenberg();
    SUBCASE("q = 2 matches the squared-gradient rate") {
        LqReport r = kappa_q(h, 3.0, 2.0);
        CHECK(r.pairing == doctest::Approx(0.0));
        CHECK(r.square_sum == doctest::Approx(2.0));
        CHECK(r.kappa_q == doctest::Approx(2.0));  // 2 beta - 4 at beta = 3
        CHECK(r.beta_threshold == doctest::Approx(2.0));
    }
    SUBCASE("q = 1.5 needs beta above 4") {
        LqReport r = kappa_q(h, 3.0, 1.5);
        CHECK(r.kappa_q == doctest::Approx(1.5 * 3.0 - 6.0));  // negative
        CHECK(r.beta_threshold == doctest::Approx(4.0));
        CHECK(kappa_q(h, 5.0, 1.5).kappa_q == doctest::Approx(1.5));
    }
    SUBCASE("step-3 model pairs across the chain") {
        LqReport r = kappa_q(martinet(), 5.0, 2.0);
        CHECK(r.pairing == doctest::Approx(1.0));
        CHECK(r.square_sum == doctest::Approx(3.0));
        CHECK(r.kappa_q == doctest::Approx(2.0 * 5.0 - 2.0 - 6.0));
        CHECK(r.beta_threshold == doctest::Approx(4.0));
    }
    SUBCASE("q at or below 1 is rejected") {
        CHECK_THROWS_AS(kappa_q(h, 3.0, 1.0), std::domain_error);
        CHECK_THROWS_AS(kappa_q(h, 3.0, 0.5), std::domain_error);
    }
}

TEST_CASE("pointwise rate reduces to the constant-tensor rate") {
    for (const Geometry& g : {heisenberg(), martinet()}) {
        CAPTURE(g.name);
        ModelSpec m = ModelSpec::plain(g, 4.0);
        KappaReport global = kappa(m);
        PointwiseModel pm = PointwiseModel::from_model(m);
        for (uint64_t trial = 0; trial < 10; ++trial) {
            std::vector<double> x(g.N);
            for (int i = 0; i < g.N; ++i)
                x[i] = 3.0 * (2.0 * uniform01(0xc0117eacULL, trial, i, 0) - 1.0);
            PointwiseKappa pk = kappa_pointwise(pm, x);
            CHECK(pk.C4 == doctest::Approx(0.0));
            CHECK(pk.kappa == doctest::Approx(global.kappa).epsilon(1e-12));
        }
    }
}

TEST_CASE("pointwise rate with slowly varying structure coefficients") {
    // step-2 fields with the bracket coefficient promoted to 1 + x_2: the
    // derivative term C4 = 1 at the origin comes from X_2 (1 + x_2) = 1
    Geometry g = heisenberg();
    PointwiseModel pm = PointwiseModel::from_model(ModelSpec::plain(g, 4.0));
    Poly one_plus_y = Poly::constant(3, Rational(1)) + Poly::variable(3, 1);
    pm.c[(0 * 2 + 1) * 3 + 2] = one_plus_y;           // c_{1,2,3} = 1 + x_2
    pm.c[(1 * 2 + 0) * 3 + 2] = -one_plus_y;          // c_{2,1,3} = -(1 + x_2)

    std::vector<double> origin = {0.0, 0.0, 0.0};
    PointwiseKappa pk = kappa_pointwise(pm, origin);
    CHECK(pk.C1 == doctest::Approx(0.0));
    CHECK(pk.C3 == doctest::Approx(4.0));
    CHECK(pk.C4 == doctest::Approx(1.0));
    CHECK(pk.kappa == doctest::Approx(2.0 * 4.0 - 4.0 - 1.0));

    // away from the origin the quadratic constant grows like (1 + x_2)^2
    std::vector<double> shifted = {0.0, 1.0, 0.0};
    PointwiseKappa pk2 = kappa_pointwise(pm, shifted);
    CHECK(pk2.C3 == doctest::Approx(16.0));
    CHECK(pk2.C4 == doctest::Approx(1.0));
    CHECK(pk2.kappa < pk.kappa);
}

TEST_CASE("model validation rejects inconsistent specifications") {
    Geometry g = heisenberg();
    ModelSpec m = ModelSpec::plain(g, 2.0);
    m.G = Mat(3, 3);  // wrong arity: G acts on the generators only
    CHECK_THROWS(kappa(m));

    ModelSpec m2 = ModelSpec::plain(g, 2.0);
    m2.alpha.sup_alpha = {0.1};  // arity mismatch with m = 2
    CHECK_THROWS(kappa(m2));
}
