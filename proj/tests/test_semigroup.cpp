// Estimator layer: verdict logic, identity cases, equality saturation of the
// gradient and variance inequalities, estimator-mode agreement, the
// drift-bound report, the long-run sampler and the exponential-moment check.
#include "hypocoerce/estimators.hpp"

#include "doctest.h"

#include <cmath>

using namespace hypo;

namespace {

SemigroupConfig fast_cfg(size_t paths = 20000, double dt = 1e-3) {
    SemigroupConfig cfg;
    cfg.dt = dt;
    cfg.n_paths = paths;
    cfg.seed = 11;
    return cfg;
}

EstimatorResult est(double v, double se) {
    EstimatorResult r;
    r.value = v;
    r.std_err = se;
    return r;
}

} // namespace

TEST_CASE("bound verdicts by margin") {
    // clear pass
    BoundCheck c = judge_bound(1.0, est(1.0, 0.05), est(2.0, 0.05), 0.0);
    CHECK(c.verdict == Verdict::holds);
    CHECK(c.margin_sigma > 10.0);

    // clear violation
    c = judge_bound(1.0, est(2.0, 0.05), est(1.0, 0.05), 0.0);
    CHECK(c.verdict == Verdict::violated);
    CHECK(c.margin_sigma < -10.0);

    // between two and three sigma stays open
    c = judge_bound(1.0, est(1.25, 0.07), est(1.0, 0.07), 0.0);
    CHECK(c.verdict == Verdict::inconclusive);

    // inside two sigma passes
    c = judge_bound(1.0, est(1.1, 0.07), est(1.0, 0.07), 0.0);
    CHECK(c.verdict == Verdict::holds);

    // the bias floor widens the band
    c = judge_bound(1.0, est(1.25, 0.07), est(1.0, 0.07), 0.1);
    CHECK(c.verdict == Verdict::holds);

    // exact zero-error equality counts as a pass
    c = judge_bound(1.0, est(1.0, 0.0), est(1.0, 0.0), 0.0);
    CHECK(c.verdict == Verdict::holds);
    c = judge_bound(1.0, est(1.0 + 1e-9, 0.0), est(1.0, 0.0), 0.0);
    CHECK(c.verdict == Verdict::violated);
    CHECK(c.margin_sigma == -INFINITY);
}

TEST_CASE("time zero reproduces the observable exactly") {
    ModelSpec m = ModelSpec::plain(heisenberg(), 2.0);
    SdeSystem sys = assemble_sde(m);
    Observable f = parse_observable("sin(x)*y + z", 3);
    std::vector<double> x0 = {0.4, -1.2, 0.3};
    auto r = estimate_Ptf(m, sys, f, x0, {0.0}, fast_cfg(32));
    CHECK(r[0].value == doctest::Approx(f.eval(x0)).epsilon(1e-15));
    CHECK(r[0].std_err < 1e-9);  // accumulator rounding only
}

TEST_CASE("constant observables have zero gradient and zero variance") {
    ModelSpec m = ModelSpec::plain(heisenberg(), 3.0);
    SdeSystem sys = assemble_sde(m);
    Observable one = parse_observable("1", 3);
    std::vector<double> x0 = {0.5, 0.5, 0.0};
    SemigroupConfig cfg = fast_cfg(256);

    auto checks = check_gradient_bound(m, sys, one, x0, {0.5}, cfg, kappa(m));
    REQUIRE(checks.size() == 1);
    CHECK(checks[0].verdict == Verdict::holds);
    CHECK(std::abs(checks[0].lhs.value) < 1e-18);
    CHECK(std::abs(checks[0].rhs.value) < 1e-18);

    auto pc = check_poincare(m, sys, one, x0, {0.5}, cfg, kappa(m));
    CHECK(pc[0].verdict == Verdict::holds);
    CHECK(std::abs(pc[0].lhs.value) < 1e-18);
}

TEST_CASE("flat-family gradient identity saturates the bound") {
    // linear observable on the commutative model: both sides equal
    // e^{-2 beta t} Gamma f, so the margin reflects only scheme bias
    Geometry g = abelian(2);
    ModelSpec m = ModelSpec::plain(g, 1.0);
    SdeSystem sys = assemble_sde(m);
    Observable f = parse_observable("x + 2*y", 2);
    std::vector<double> x0 = {0.7, -0.4};
    SemigroupConfig cfg = fast_cfg(4000);
    cfg.scheme = Scheme::heun_strat;

    auto checks = check_gradient_bound(m, sys, f, x0, {0.5, 1.0}, cfg, kappa(m));
    for (const auto& c : checks) {
        CAPTURE(c.t);
        CHECK(c.verdict == Verdict::holds);
        // saturation: the two sides agree to the bias allowance
        CHECK(std::abs(c.lhs.value - c.rhs.value) <=
              2e-3 * (std::abs(c.lhs.value) + std::abs(c.rhs.value)) + 1e-6);
        double expect = std::exp(-2.0 * c.t) * 5.0;
        CHECK(c.rhs.value == doctest::Approx(expect).epsilon(0.05));
    }
}

TEST_CASE("step-2 gradient decay holds with margin above the rate floor") {
    ModelSpec m = ModelSpec::plain(heisenberg(), 3.0);
    SdeSystem sys = assemble_sde(m);
    Observable f = parse_observable("tanh(x+y)", 3);
    std::vector<double> x0 = {0.5, -0.5, 0.2};
    auto checks = check_gradient_bound(m, sys, f, x0, {0.25, 0.5}, fast_cfg(30000), kappa(m));
    for (const auto& c : checks) {
        CAPTURE(c.t);
        CHECK(c.verdict == Verdict::holds);
        CHECK(c.lhs.value > 0.0);
    }
}

TEST_CASE("variance inequality saturates on the linear contraction") {
    // Var(x_t) = (1 - e^{-2t})/1 equals the right side exactly at kappa = 2
    ModelSpec m = ModelSpec::plain(abelian(1), 1.0);
    SdeSystem sys = assemble_sde(m);
    Observable f = parse_observable("x", 1);
    std::vector<double> x0 = {1.5};
    auto checks = check_poincare(m, sys, f, x0, {1.0}, fast_cfg(50000), kappa(m));
    REQUIRE(checks.size() == 1);
    CHECK(checks[0].verdict == Verdict::holds);
    double expect = 1.0 - std::exp(-2.0);
    CHECK(checks[0].lhs.value == doctest::Approx(expect).epsilon(0.05));
    CHECK(checks[0].rhs.value == doctest::Approx(expect).epsilon(0.05));
}

TEST_CASE("fractional-moment check coincides with the gradient check at q = 2") {
    ModelSpec m = ModelSpec::plain(heisenberg(), 3.0);
    SdeSystem sys = assemble_sde(m);
    Observable f = parse_observable("tanh(x)", 3);
    std::vector<double> x0 = {0.3, 0.1, -0.2};
    SemigroupConfig cfg = fast_cfg(10000);

    auto grad = check_gradient_bound(m, sys, f, x0, {0.5}, cfg, kappa(m));
    auto lq = check_lq_bound(m, sys, f, x0, {0.5}, 2.0, cfg);
    REQUIRE(grad.size() == 1);
    REQUIRE(lq.size() == 1);
    CHECK(lq[0].lhs.value == doctest::Approx(grad[0].lhs.value).epsilon(1e-14));
    CHECK(lq[0].rhs.value == doctest::Approx(grad[0].rhs.value).epsilon(1e-14));
    CHECK(lq[0].verdict == Verdict::holds);
}

TEST_CASE("fractional-moment check requires the pure-diffusion model") {
    Geometry g = heisenberg();
    ModelSpec m = ModelSpec::plain(g, 5.0);
    m.G = Mat(2, 2);
    m.G(0, 1) = 0.3;
    SdeSystem sys = assemble_sde(m);
    Observable f = parse_observable("tanh(x)", 3);
    std::vector<double> x0 = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS(check_lq_bound(m, sys, f, x0, {0.5}, 1.5, fast_cfg(64)),
                    std::invalid_argument);

    ModelSpec m2 = ModelSpec::plain(g, 5.0);
    m2.alpha = AlphaSpec::tanh_first(g, {0.1, 0.0});
    SdeSystem sys2 = assemble_sde(m2);
    CHECK_THROWS_AS(check_lq_bound(m2, sys2, f, x0, {0.5}, 1.5, fast_cfg(64)),
                    std::invalid_argument);
}

TEST_CASE("first-variation and finite-difference derivative estimates agree") {
    ModelSpec m = ModelSpec::plain(heisenberg(), 3.0);
    SdeSystem sys = assemble_sde(m);
    Observable f = parse_observable("tanh(x+y)", 3);
    std::vector<double> x0 = {0.5, -0.5, 0.2};

    SemigroupConfig fd = fast_cfg(20000);
    SemigroupConfig tg = fd;
    tg.use_tangent = true;
    for (int k = 0; k < 3; ++k) {
        auto a = estimate_Zk_Ptf(m, sys, f, x0, {0.5}, k, fd);
        auto b = estimate_Zk_Ptf(m, sys, f, x0, {0.5}, k, tg);
        double se = std::hypot(a[0].std_err, b[0].std_err);
        CHECK(std::abs(a[0].value - b[0].value) < 3.0 * se + 1e-4);
    }
}

TEST_CASE("drift bound report for the cutoff gauge") {
    SUBCASE("step-2 geometry from outside the cutoff plateau") {
        ModelSpec m = ModelSpec::plain(heisenberg(), 2.0);
        SdeSystem sys = assemble_sde(m);
        std::vector<double> x0 = {3.0, 0.0, 0.0};  // gauge value 3
        auto rep = check_lyapunov(m, sys, x0, {0.25, 0.5}, fast_cfg(20000));
        CHECK(rep.rho_x0 == doctest::Approx(3.0).epsilon(1e-9));
        CHECK(rep.drift_bound >= 0.0);
        CHECK(std::isfinite(rep.drift_bound));
        for (const auto& c : rep.checks) CHECK(c.verdict == Verdict::holds);
    }
    SUBCASE("flat family uses the euclidean radius") {
        ModelSpec m = ModelSpec::plain(abelian(2), 1.0);
        SdeSystem sys = assemble_sde(m);
        std::vector<double> x0 = {3.0, 4.0};  // radius 5
        auto rep = check_lyapunov(m, sys, x0, {0.5}, fast_cfg(20000));
        CHECK(rep.rho_x0 == doctest::Approx(5.0).epsilon(1e-9));
        for (const auto& c : rep.checks) CHECK(c.verdict == Verdict::holds);
    }
    SUBCASE("unsupported geometry is rejected") {
        ModelSpec m = ModelSpec::plain(grusin(), 2.0);
        SdeSystem sys = assemble_sde(m);
        std::vector<double> x0 = {1.0, 1.0};
        CHECK_THROWS_AS(check_lyapunov(m, sys, x0, {0.5}, fast_cfg(64)),
                        std::invalid_argument);
    }
}

TEST_CASE("long-run sampler: grid size, mean and spread of the contraction") {
    ModelSpec m = ModelSpec::plain(abelian(1), 1.0);
    SdeSystem sys = assemble_sde(m);
    SemigroupConfig cfg = fast_cfg(2000, 2e-3);
    std::vector<double> x0 = {0.0};
    InvariantSamples s = empirical_invariant_measure(m, sys, x0, 3.0, 3.0, 0.5, cfg);
    // thinned grid 3.0, 3.5, ..., 6.0 gives 7 states per path
    CHECK(s.n_states == 7 * 2000);
    CHECK(s.dim == 1);

    MomentStats ms;
    for (size_t i = 0; i < s.n_states; ++i) {
        ms.n += 1;
        ms.sum += s.state(i)[0];
        ms.sum_sq += s.state(i)[0] * s.state(i)[0];
    }
    // stationary law is centered with variance 1/beta = 1
    CHECK(std::abs(ms.mean()) < 0.05);
    CHECK(ms.variance() == doctest::Approx(1.0).epsilon(0.08));
}

TEST_CASE("exponential-moment certificate on the stationary contraction") {
    ModelSpec m = ModelSpec::plain(abelian(1), 1.0);
    SdeSystem sys = assemble_sde(m);
    Observable f = parse_observable("tanh(x)", 1);
    SemigroupConfig cfg = fast_cfg(4000, 2e-3);
    std::vector<double> x0 = {0.0};
    InvariantSamples s = empirical_invariant_measure(m, sys, x0, 3.0, 3.0, 0.5, cfg);

    KappaReport rate = kappa(m);  // kappa = 2
    ExpMomentReport rep = check_exp_moment(m, s, f, {0.1, 0.2, 0.3, 0.4}, rate);
    // the certificate is conservative: |1 - tanh^2|^2 <= (1 + 1)^2
    CHECK(rep.gamma_bound == doctest::Approx(4.0));
    CHECK(rep.slope_limit == doctest::Approx(rep.gamma_bound / 2.0));
    CHECK(rep.verdict == Verdict::holds);
    // gaussian-tail heuristic: excess grows like (delta^2/2) Var f < limit
    CHECK(rep.fit.slope < rep.slope_limit);

    SUBCASE("guards") {
        // negative rate
        KappaReport bad = rate;
        bad.kappa = -1.0;
        CHECK_THROWS_AS(check_exp_moment(m, s, f, {0.2, 0.4}, bad), std::domain_error);
        // delta beyond the certified regime delta^2 Gamma / kappa <= 1
        CHECK_THROWS_AS(check_exp_moment(m, s, f, {0.2, 0.75}, rate), std::domain_error);
        // unbounded carre du champ
        Observable fx2 = parse_observable("x^2", 1);
        CHECK_THROWS_AS(check_exp_moment(m, s, fx2, {0.2, 0.4}, rate), std::domain_error);
        // degenerate delta grid
        CHECK_THROWS_AS(check_exp_moment(m, s, f, {0.2}, rate), std::invalid_argument);
        // too few samples
        InvariantSamples tiny;
        tiny.dim = 1;
        tiny.n_states = 4;
        tiny.states = {0.1, -0.2, 0.3, 0.0};
        CHECK_THROWS_AS(check_exp_moment(m, tiny, f, {0.2, 0.4}, rate), std::invalid_argument);
    }
}

TEST_CASE("blowup quota throws instead of silently truncating the ensemble") {
    // driftless diffusion started far out: the exponential observable
    // overflows on every path, tripping the finiteness screen at capture
    ModelSpec m = ModelSpec::plain(abelian(1), 0.0);
    SdeSystem sys = assemble_sde(m);
    Observable f = parse_observable("expneg(0 - 40*x)", 1);  // e^{40 x} overflows
    std::vector<double> x0 = {40.0};
    SemigroupConfig cfg = fast_cfg(128, 1e-2);
    cfg.blowup_quota = 1e-3;
    CHECK_THROWS_AS(estimate_Ptf(m, sys, f, x0, {8.0}, cfg), BlowupError);
}
