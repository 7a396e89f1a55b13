// Monte Carlo estimators for the semigroup P_t f and its frame derivatives,
// plus the statistical verdicts for the decay inequalities.  Derivatives use
// common-random-number finite differences seeded by exact flows of the frame
// fields (with h, h/2 Richardson refinement), or optionally the transported
// first-variation process.  Squared means are bias-corrected by -se^2.
#pragma once

#include "hypocoerce/constants.hpp"
#include "hypocoerce/sde.hpp"
#include "hypocoerce/stats.hpp"

#include <stdexcept>
#include <string>

namespace hypo {

struct BlowupError : std::runtime_error {
    size_t path, step;
    BlowupError(size_t p, size_t s, size_t count, size_t total)
        : std::runtime_error("non-finite state on " + std::to_string(count) + "/" +
                             std::to_string(total) + " paths (first: path " + std::to_string(p) +
                             ", step " + std::to_string(s) + ")"),
          path(p), step(s) {}
};

struct SemigroupConfig {
    double dt = 1e-3;
    Scheme scheme = Scheme::euler_ito;
    uint64_t seed = 1;
    size_t n_paths = 10000;
    double fd_h = 1e-3;
    size_t chunk_size = 1024;
    uint32_t salt = 0;
    bool decouple_crn = false;   // test hook: break the common random numbers
    bool use_tangent = false;    // first-variation derivatives instead of FD
    double blowup_quota = 1e-3;  // tolerated fraction of non-finite paths

    EnsembleConfig ensemble() const {
        EnsembleConfig e;
        e.dt = dt;
        e.scheme = scheme;
        e.seed = seed;
        e.n_paths = n_paths;
        e.chunk_size = chunk_size;
        e.salt = salt;
        e.decouple_bundle = decouple_crn;
        return e;
    }
};

struct EstimatorResult {
    double time = 0;
    double value = 0;
    double std_err = 0;
    size_t n_paths = 0;
};

enum class Verdict { holds, violated, inconclusive };
std::string verdict_name(Verdict v);

struct BoundCheck {
    double t = 0;
    EstimatorResult lhs, rhs;
    double combined_err = 0;  // statistical error plus a deterministic-bias floor
    double margin_sigma = 0;  // (rhs - lhs) / combined_err
    Verdict verdict = Verdict::inconclusive;
};

// diff = lhs - rhs judged against combined error: holds below 2 sigma,
// violated above 3 sigma, inconclusive between.
BoundCheck judge_bound(double t, const EstimatorResult& lhs, const EstimatorResult& rhs,
                       double bias_floor);

std::vector<EstimatorResult> estimate_Ptf(const ModelSpec& model, const SdeSystem& sys,
                                          const Observable& f, std::span<const double> x0,
                                          const std::vector<double>& t_grid,
                                          const SemigroupConfig& cfg);

// Z_k P_t f at x0 for one frame index.
std::vector<EstimatorResult> estimate_Zk_Ptf(const ModelSpec& model, const SdeSystem& sys,
                                             const Observable& f, std::span<const double> x0,
                                             const std::vector<double>& t_grid, int k,
                                             const SemigroupConfig& cfg);

// One ensemble pass sharing a single noise stream: P_t f, the moments of f,
// E[Gamma^p f] for requested powers, and all frame derivatives.
struct GradientSuite {
    std::vector<double> times;
    std::vector<std::vector<EstimatorResult>> f_moments;  // [grid][power-1], raw moments of f
    std::vector<std::vector<EstimatorResult>> gamma;      // [grid][ip], E[(Gamma f)^p]
    std::vector<std::vector<EstimatorResult>> zk;         // [grid][k]
    std::vector<double> gamma_powers;
    size_t n_paths = 0;
};

struct SuiteOptions {
    std::vector<double> gamma_powers = {1.0};
    int f_moment_count = 1;
};

GradientSuite run_gradient_suite(const ModelSpec& model, const SdeSystem& sys,
                                 const Observable& f, std::span<const double> x0,
                                 const std::vector<double>& t_grid, const SemigroupConfig& cfg,
                                 const SuiteOptions& opts = {});

// sum_k |Z_k P_t f|^2 (x0) <= e^{-kappa t} P_t (Gamma f)(x0)
std::vector<BoundCheck> check_gradient_bound(const ModelSpec& model, const SdeSystem& sys,
                                             const Observable& f, std::span<const double> x0,
                                             const std::vector<double>& t_grid,
                                             const SemigroupConfig& cfg,
                                             const KappaReport& rate);

// (sum_k |Z_k P_t f|^2)^(q/2) <= e^{-kappa_q t} P_t (Gamma f)^(q/2); the
// proved case needs G = 0 and alpha = 0.
std::vector<BoundCheck> check_lq_bound(const ModelSpec& model, const SdeSystem& sys,
                                       const Observable& f, std::span<const double> x0,
                                       const std::vector<double>& t_grid, double q,
                                       const SemigroupConfig& cfg);

// E[rho(xi_t)] <= rho(x0) + C t with C a grid-certified uniform bound on the
// generator applied to the cutoff gauge function rho.  Supported for the
// step-2 gauge geometry and the abelian family.
struct LyapunovReport {
    double drift_bound = 0;   // C
    double rho_x0 = 0;
    std::vector<BoundCheck> checks;
};

LyapunovReport check_lyapunov(const ModelSpec& model, const SdeSystem& sys,
                              std::span<const double> x0, const std::vector<double>& t_grid,
                              const SemigroupConfig& cfg);

// P_t f^2 - (P_t f)^2 <= (2/kappa)(1 - e^{-kappa t}) P_t (Gamma f)
std::vector<BoundCheck> check_poincare(const ModelSpec& model, const SdeSystem& sys,
                                       const Observable& f, std::span<const double> x0,
                                       const std::vector<double>& t_grid,
                                       const SemigroupConfig& cfg, const KappaReport& rate);

// States drawn from the long-run dynamics: n_paths independent chains, each
// thinned after the burn-in window.
struct InvariantSamples {
    int dim = 0;
    size_t n_states = 0;
    std::vector<double> states;  // n_states x dim
    double burn_in = 0, window = 0, thin = 0;

    std::span<const double> state(size_t i) const {
        return {states.data() + i * dim, static_cast<size_t>(dim)};
    }
};

InvariantSamples empirical_invariant_measure(const ModelSpec& model, const SdeSystem& sys,
                                             std::span<const double> x0, double burn_in,
                                             double window, double thin,
                                             const SemigroupConfig& cfg);

// log E[e^{delta f}] - delta E[f] against the exponent delta^2 ||Gamma f|| / kappa:
// the fitted slope in delta^2 must not exceed ||Gamma f|| / kappa.  Requires
// the certified bound to satisfy delta^2 ||Gamma f|| / kappa <= 1 for every
// delta on the grid.
struct ExpMomentReport {
    double gamma_bound = 0;  // certified ||Gamma f||_inf
    double kappa = 0;
    std::vector<double> deltas;
    std::vector<double> excess;      // log E[e^{delta f}] - delta E[f]
    std::vector<double> excess_se;
    LineFit fit;                     // excess against delta^2
    double slope_limit = 0;          // ||Gamma f|| / kappa
    Verdict verdict = Verdict::inconclusive;
};

ExpMomentReport check_exp_moment(const ModelSpec& model, const InvariantSamples& samples,
                                 const Observable& f, const std::vector<double>& deltas,
                                 const KappaReport& rate);

} // namespace hypo
