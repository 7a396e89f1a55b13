// Finite box of site-copies of a catalog geometry coupled by finite-range
// drift interactions alpha_{k,i}(omega) = a * sum_{|v|<=R} J_v tanh(omega_{k+v,1})
// acting along every generator of site k.  Sites outside the box are frozen at
// boundary values.  Harnesses: per-site complete-gradient profiles (speed of
// information propagation), discrepancy between nested interaction sets
// (volume convergence), and two-configuration decay (ergodicity).
#pragma once

#include "hypocoerce/estimators.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace hypo {

// Product of integer intervals [lo_i, hi_i], row-major site indexing.
struct Box {
    std::vector<int> lo, hi;

    int dims() const { return static_cast<int>(lo.size()); }
    size_t size() const;
    bool contains(std::span<const int> s) const;
    size_t index(std::span<const int> s) const;
    std::vector<int> site_at(size_t idx) const;

    static Box centered(int d, int radius);  // [-radius, radius]^d
};

// l^1 lattice distance between a site and a site set.
int l1_norm(std::span<const int> v);
int l1_dist(std::span<const int> a, std::span<const int> b);
int dist_to_set(std::span<const int> site, const std::vector<std::vector<int>>& set);

struct CouplingSpec {
    double amplitude = 0;  // a
    std::vector<std::pair<std::vector<int>, double>> stencil;  // (offset v, weight J_v)

    double sum_abs() const;          // sum_v |J_v|
    double max_abs_offsite() const;  // max_{v != 0} |J_v|
    double weight_at_zero() const;   // J_0

    static CouplingSpec nearest_neighbor(int d, double amplitude, double weight = 1.0);
};

struct LatticeParams {
    Box box;
    std::vector<std::vector<int>> interaction_sites;  // empty: every box site
    int range = 1;                                    // R
    Geometry site;
    double beta = 1;
    Mat G;  // m x m, empty: zero
    CouplingSpec coupling;
    std::vector<double> boundary_state;  // exterior per-site state; empty: zeros
    std::map<std::vector<int>, std::vector<double>> boundary_overrides;
};

struct LatticeModel {
    Box box;
    std::vector<char> interacting;          // per box index
    std::vector<std::vector<int>> lambda;   // interaction site list
    int range = 1;
    Geometry site;
    double beta = 1;
    Mat G;
    CouplingSpec coupling;
    std::vector<double> boundary_state;
    std::map<std::vector<int>, std::vector<double>> boundary_overrides;
    std::vector<std::string> warnings;

    int dims() const { return box.dims(); }
    size_t n_sites() const { return box.size(); }
    int site_dim() const { return site.N; }
    size_t state_dim() const { return n_sites() * static_cast<size_t>(site.N); }
    size_t flat(std::span<const int> s, int comp) const {
        return box.index(s) * static_cast<size_t>(site.N) + static_cast<size_t>(comp);
    }
    ModelSpec site_model() const;  // coupling-free single-site specification
    std::vector<double> frozen_state(const std::vector<int>& s) const;
};

// Validates box/interaction-set/stencil consistency and that every frame
// field has a constant first component (the certified coupling bounds need
// it).  Warns when the interaction set touches the boundary shell.
LatticeModel build_lattice(const LatticeParams& p);

// Per-site states inside the box; absent sites default to zero.
struct Configuration {
    std::map<std::vector<int>, std::vector<double>> values;
};

std::vector<double> flatten_state(const LatticeModel& m, const Configuration& c);

// Observable depending on finitely many site coordinates: packed variable j
// of `f` reads component vars[j].second of site vars[j].first.
struct CylinderObservable {
    Observable f;
    std::vector<std::pair<std::vector<int>, int>> vars;

    std::vector<std::vector<int>> localization() const;  // unique sites, sorted

    static CylinderObservable coordinate(const std::vector<int>& site, int comp);
};

double eval_cylinder(const CylinderObservable& f, const LatticeModel& m, const double* state);

// Drift/diffusion of the coupled system in the format the path engine
// consumes; noise channel site*m + i drives generator i of that site.
class LatticeSystem {
  public:
    explicit LatticeSystem(const LatticeModel& m);

    int dim() const { return n_dim_; }
    int channels() const { return n_channels_; }

    void drift(const double* x, bool ito, double* out) const;
    void diffusion_add(const double* x, const double* z, double w, double* out) const;
    void jvp_drift(const double* x, const double* v, bool ito, double* out) const;
    void jvp_diffusion_add(const double* x, const double* v, const double* z, double w,
                           double* out) const;

  private:
    struct LiveNeighbor {
        double weight;      // a * J_v
        size_t first_flat;  // flat index of the neighbor's first coordinate
    };
    struct SiteCoupling {
        size_t block;  // flat offset of the interacting site's state block
        std::vector<LiveNeighbor> live;
        double frozen_drive = 0;  // sum over exterior neighbors of a*J_v*tanh(boundary_1)
    };

    int n_dim_ = 0, n_channels_ = 0, site_n_ = 0, m_ = 0;
    SdeSystem core_;      // single-site, coupling-free
    CompiledField xsum_;  // sum_i X_i (the coupling direction)
    std::vector<SiteCoupling> coupling_;
};

// kappa_bar = 2(beta lambda_* - C) with C = C_tilde + sup_k A_k, the cross-site
// matrix M_{k,j} (zero beyond range R), and varsigma = kappa_bar - max M.
struct LatticeConstants {
    double S1 = 0;    // sum_r |first component of Z_r|
    double Smax = 0;  // max_r |first component of Z_r|
    double sup_alpha = 0;  // a * sum_v |J_v|
    double A_sup = 0;      // sup_k A_k
    double C_tilde = 0;
    double C = 0;
    double kappa_bar = 0;
    double M_max = 0;
    std::vector<std::pair<std::vector<int>, double>> M;  // offset v != 0 -> M value
    double varsigma = 0;
    double beta_threshold = 0;  // beta with kappa_bar = 0
    KappaReport site;           // single-site report feeding C_tilde
};

LatticeConstants lattice_constants(const LatticeModel& m);

// One CRN pass from a single start: per-site complete gradients of P_t f via
// transported first variations, and E[Gamma_Lambda f(xi_t)].
struct SiteGamma {
    std::vector<int> site;
    int n_k = 0;           // floor(dist(site, localization of f) / R)
    double gamma = 0;      // bias-corrected sum_r (mean of Z_{k,r}-variation of f)^2
    double gamma_se = 0;
};

struct LatticeGammaReport {
    std::vector<double> times;
    std::vector<std::vector<SiteGamma>> site_gamma;  // [grid][report site]
    std::vector<EstimatorResult> gamma_lambda;       // E[Gamma_Lambda f(xi_t)]
    size_t n_paths = 0;
};

LatticeGammaReport lattice_gamma_suite(const LatticeModel& model, const LatticeSystem& sys,
                                       const CylinderObservable& f, const Configuration& omega,
                                       const std::vector<double>& t_grid,
                                       const SemigroupConfig& cfg,
                                       const std::vector<std::vector<int>>& report_sites);

// Per-site profile max over probe configurations, with the decay fits: a
// rank-correlation of log Gamma_k against N_k, a log-linear envelope, and the
// shape N(log C - log N + 2 + log t) + C t with C fitted by golden section.
struct SpeedRow {
    std::vector<int> site;
    int n_k = 0;
    double gamma = 0;
    double gamma_se = 0;
};

struct SpeedReport {
    double t = 0;
    std::vector<SpeedRow> rows;
    size_t fit_rows = 0;   // rows with gamma > max(se, 0) entering the fits
    double spearman = 0;   // rank correlation of log gamma vs n_k
    LineFit envelope;      // log gamma against n_k
    double shape_C = 0;
    double shape_offset = 0;
    size_t n_paths = 0;
};

SpeedReport finite_speed_profile(const LatticeModel& model, const LatticeSystem& sys,
                                 const CylinderObservable& f, double t,
                                 const std::vector<Configuration>& probes,
                                 const SemigroupConfig& cfg,
                                 const std::vector<std::vector<int>>& report_sites = {});

// Discrepancy |P_t f| between two interaction sets on the same box, coupled
// pathwise by identical noise; n_bar = floor(dist(Lambda2 minus Lambda1,
// localization of f) / R).
struct CauchyRow {
    size_t probe = 0;
    double diff = 0;  // mean over paths of f difference
    double se = 0;
    size_t n = 0;
};

struct CauchyReport {
    int n_bar = 0;
    double max_abs_diff = 0;
    double se_at_max = 0;
    std::vector<CauchyRow> rows;
};

CauchyReport volume_cauchy(const LatticeModel& m1, const LatticeModel& m2,
                           const CylinderObservable& f, double t,
                           const std::vector<Configuration>& probes, const SemigroupConfig& cfg);

// |P_t f(omega) - P_t f(omega_tilde)| on a grid under coupled noise, with a
// log-linear decay fit; rows sinking below 3 sigma truncate the fit.
struct ErgodicityReport {
    std::vector<EstimatorResult> diff;
    size_t fit_rows = 0;
    bool converged_early = false;
    LineFit fit;  // log |diff| against t
    double rate = 0, rate_se = 0;
    bool rate_positive_95 = false;
};

ErgodicityReport ergodicity_decay(const LatticeModel& model, const LatticeSystem& sys,
                                  const CylinderObservable& f, const Configuration& omega,
                                  const Configuration& omega_tilde,
                                  const std::vector<double>& t_grid, const SemigroupConfig& cfg);

// Weighted gauge sum sum_k (1+|k|_1)^{-zeta} d(omega_k) over the box, with
// d the homogeneous gauge sum_p |x_p|^{1/w_p} read off the dilation weights.
struct OmegaReport {
    double zeta = 0;
    double bound = 0;
    double sum = 0;
    bool member = false;
};

std::vector<int> gauge_weights(const Geometry& g);  // diagonal dilation weights
double gauge_distance(const Geometry& g, std::span<const double> x);

OmegaReport omega_membership(const LatticeModel& m, const Configuration& omega, double zeta,
                             double bound);

} // namespace hypo
