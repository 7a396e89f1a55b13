// SDE assembly and integration.  The generator
//   L = sum_i X_i^2 - beta D + sum_ij G_ij X_i X_j + sum_i alpha_i X_i
// is realized as the Stratonovich equation
//   dxi = mu dt + sqrt(2) sum_i Y_i o dW_i,
// with Y_i = sum_j B_ji X_j, B = (I + G_sym)^(1/2), and
//   mu = sum_i alpha_i X_i - beta D + (1/2) sum_ij G_asym_ij [X_i, X_j].
// The equivalent Ito drift adds sum_jj' (I + G_sym)_jj' grad_{X_j} X_j'.
// Two weak-order-1 schemes: Heun predictor-corrector on the Stratonovich
// form and Euler-Maruyama on the corrected Ito form.
//
// The ensemble engine integrates a bundle of initial states sharing one
// noise stream per path (common random numbers), optionally transports
// tangent (first-variation) vectors along the first bundle member, and
// accumulates user quantities per grid time into per-chunk slots so that
// every reduction is independent of the worker count.
#pragma once

#include "hypocoerce/model.hpp"
#include "hypocoerce/parallel.hpp"
#include "hypocoerce/rng.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace hypo {

struct CompiledPoly {
    struct Term {
        double c;
        std::vector<int> e;
    };
    int nvars = 0;
    std::vector<Term> terms;

    static CompiledPoly from(const Poly& p, double scale = 1.0);
    bool zero() const { return terms.empty(); }

    double eval(const double* x) const {
        double acc = 0;
        for (const Term& t : terms) {
            double v = t.c;
            for (int i = 0; i < nvars; ++i)
                for (int r = 0; r < t.e[i]; ++r) v *= x[i];
            acc += v;
        }
        return acc;
    }
};

struct CompiledField {
    int dim = 0;
    std::vector<CompiledPoly> comp;
    std::vector<CompiledPoly> jac;  // dim*dim entries: d comp[p] / d x_q

    static CompiledField from(const VectorField& f, double scale = 1.0);
    // sum_r weight[r] * fields[r]; the Jacobian polynomials are built along
    // with the components
    static CompiledField combo(int dim, const std::vector<std::pair<double, const VectorField*>>& parts);

    void add_eval(const double* x, double w, double* out) const {
        for (int p = 0; p < dim; ++p)
            if (!comp[p].zero()) out[p] += w * comp[p].eval(x);
    }
    // out += w * (Jacobian at x) v
    void add_jvp(const double* x, const double* v, double w, double* out) const {
        for (int p = 0; p < dim; ++p)
            for (int q = 0; q < dim; ++q) {
                const CompiledPoly& d = jac[static_cast<size_t>(p) * dim + q];
                if (!d.zero()) out[p] += w * d.eval(x) * v[q];
            }
    }
};

enum class Scheme { heun_strat, euler_ito };

Scheme scheme_by_name(const std::string& name);
std::string scheme_name(Scheme s);

struct SdeSystem {
    int n_dim = 0;
    int n_channels = 0;

    CompiledField drift_base;   // -beta D + (1/2) sum G_asym_ij [X_i, X_j]
    CompiledField ito_shift;    // sum (I+G_sym)_jj' grad_{X_j} X_j'
    std::vector<CompiledField> diff_col;  // sqrt(2) Y_i, one per channel

    bool has_alpha = false;
    std::vector<Observable> alpha;                    // size m
    std::vector<std::vector<Observable>> alpha_grad;  // [i][q] = d alpha_i / d x_q
    std::vector<CompiledField> gen_col;               // X_i compiled, for the alpha drift

    int dim() const { return n_dim; }
    int channels() const { return n_channels; }

    void drift(const double* x, bool ito, double* out) const {
        for (int p = 0; p < n_dim; ++p) out[p] = 0;
        drift_base.add_eval(x, 1.0, out);
        if (ito) ito_shift.add_eval(x, 1.0, out);
        if (has_alpha)
            for (size_t i = 0; i < alpha.size(); ++i) {
                if (alpha[i].empty()) continue;
                double a = alpha[i].eval({x, static_cast<size_t>(n_dim)});
                gen_col[i].add_eval(x, a, out);
            }
    }

    // out += w * sum_i A_i(x) z[i]
    void diffusion_add(const double* x, const double* z, double w, double* out) const {
        for (int i = 0; i < n_channels; ++i)
            if (z[i] != 0.0) diff_col[i].add_eval(x, w * z[i], out);
    }

    void jvp_drift(const double* x, const double* v, bool ito, double* out) const {
        for (int p = 0; p < n_dim; ++p) out[p] = 0;
        drift_base.add_jvp(x, v, 1.0, out);
        if (ito) ito_shift.add_jvp(x, v, 1.0, out);
        if (has_alpha) {
            std::span<const double> xs{x, static_cast<size_t>(n_dim)};
            for (size_t i = 0; i < alpha.size(); ++i) {
                if (alpha[i].empty()) continue;
                double a = alpha[i].eval(xs);
                gen_col[i].add_jvp(x, v, a, out);
                double da = 0;
                for (int q = 0; q < n_dim; ++q)
                    da += alpha_grad[i][q].eval(xs) * v[q];
                gen_col[i].add_eval(x, da, out);
            }
        }
    }

    void jvp_diffusion_add(const double* x, const double* v, const double* z, double w,
                           double* out) const {
        for (int i = 0; i < n_channels; ++i)
            if (z[i] != 0.0) diff_col[i].add_jvp(x, v, w * z[i], out);
    }
};

// Builds the integrable system; throws std::domain_error when I + G_sym is
// not positive definite.
SdeSystem assemble_sde(const ModelSpec& model);

// Flow map exp(h F)(x) by classical RK4 with substep <= 0.005; |h| <= 0.1.
std::vector<double> flow_exp(const CompiledField& f, std::span<const double> x, double h);
std::vector<double> flow_exp(const VectorField& f, std::span<const double> x, double h);

struct EnsembleConfig {
    double dt = 1e-3;
    Scheme scheme = Scheme::euler_ito;
    uint64_t seed = 1;
    size_t n_paths = 10000;
    size_t chunk_size = 1024;   // fixed reduction granularity, worker-independent
    uint32_t salt = 0;          // separates independent noise streams per seed
    uint64_t channel_offset = 0;
    bool noise_off = false;     // deterministic flow (test hook)
    bool decouple_bundle = false;  // independent noise per bundle member (test hook)
};

struct BundleView {
    const double* states;    // members x dim
    const double* tangents;  // n_tangents x dim
    size_t members;
    size_t n_tangents;
    int dim;
    double time;

    const double* state(size_t i) const { return states + i * dim; }
    const double* tangent(size_t i) const { return tangents + i * dim; }
};

struct EnsembleResult {
    struct Cell {
        size_t n_ok = 0;
        double sum = 0, sum_sq = 0;
    };
    std::vector<double> times;               // effective grid times (step multiples)
    std::vector<std::vector<Cell>> cells;    // [grid][quantity]
    size_t n_paths = 0;
    size_t blown_paths = 0;
    size_t first_blown_path = 0, first_blown_step = 0;
    std::vector<double> raw;                 // optional [path][grid][quantity]

    double mean(size_t g, size_t q) const {
        const Cell& c = cells[g][q];
        return c.n_ok ? c.sum / static_cast<double>(c.n_ok) : 0.0;
    }
    double std_err(size_t g, size_t q) const {
        const Cell& c = cells[g][q];
        if (c.n_ok < 2) return 0.0;
        double m = mean(g, q);
        double var = (c.sum_sq - static_cast<double>(c.n_ok) * m * m) /
                     static_cast<double>(c.n_ok - 1);
        return std::sqrt(std::max(var, 0.0) / static_cast<double>(c.n_ok));
    }
};

namespace detail {

inline std::vector<size_t> grid_steps(const std::vector<double>& times, double dt) {
    std::vector<size_t> steps;
    steps.reserve(times.size());
    double prev = -1;
    for (double t : times) {
        if (t < 0) throw std::invalid_argument("negative grid time");
        if (t <= prev) throw std::invalid_argument("grid times must be strictly increasing");
        prev = t;
        steps.push_back(static_cast<size_t>(std::llround(t / dt)));
    }
    return steps;
}

} // namespace detail

// QuantityFn: void(size_t path, size_t grid_idx, const BundleView&, double* out).
template <class System, class QuantityFn>
EnsembleResult run_ensemble(const System& sys, const EnsembleConfig& cfg,
                            const std::vector<std::vector<double>>& init_states,
                            const std::vector<std::vector<double>>& init_tangents,
                            const std::vector<double>& grid_times, size_t n_quantities,
                            QuantityFn&& qf, bool store_raw = false) {
    if (init_states.empty()) throw std::invalid_argument("empty initial bundle");
    const int dim = sys.dim();
    const int channels = sys.channels();
    for (const auto& s : init_states)
        if (static_cast<int>(s.size()) != dim) throw std::invalid_argument("initial state arity mismatch");
    for (const auto& v : init_tangents)
        if (static_cast<int>(v.size()) != dim) throw std::invalid_argument("tangent arity mismatch");
    if (!(cfg.dt > 0)) throw std::invalid_argument("dt must be positive");

    std::vector<size_t> gsteps = detail::grid_steps(grid_times, cfg.dt);
    size_t last_step = gsteps.empty() ? 0 : gsteps.back();
    size_t members = init_states.size();
    size_t n_tan = init_tangents.size();

    EnsembleResult res;
    res.n_paths = cfg.n_paths;
    res.times.resize(gsteps.size());
    for (size_t g = 0; g < gsteps.size(); ++g) res.times[g] = static_cast<double>(gsteps[g]) * cfg.dt;
    if (store_raw) res.raw.assign(cfg.n_paths * gsteps.size() * n_quantities, 0.0);

    size_t n_chunks = (cfg.n_paths + cfg.chunk_size - 1) / cfg.chunk_size;
    struct ChunkAcc {
        std::vector<EnsembleResult::Cell> cells;  // grid*quantity
        size_t blown = 0;
        size_t first_blown_path = SIZE_MAX, first_blown_step = 0;
    };
    std::vector<ChunkAcc> acc(n_chunks);
    for (auto& a : acc) a.cells.assign(gsteps.size() * n_quantities, {});

    const double sq_dt = std::sqrt(cfg.dt);

    parallel_chunks(cfg.n_paths, cfg.chunk_size, [&](size_t chunk, size_t lo, size_t hi) {
        ChunkAcc& ca = acc[chunk];
        std::vector<double> state(members * dim), tan(n_tan * dim);
        std::vector<double> z(channels), zdec(cfg.decouple_bundle ? channels : 0);
        std::vector<double> a0(dim), a1(dim), d0(dim), d1(dim), pred(dim);
        std::vector<double> ta0(dim), ta1(dim), td0(dim), td1(dim), tpred(n_tan * dim);
        std::vector<double> quants(n_quantities);

        for (size_t path = lo; path < hi; ++path) {
            for (size_t mshift = 0; mshift < members; ++mshift)
                std::copy(init_states[mshift].begin(), init_states[mshift].end(),
                          state.begin() + mshift * dim);
            for (size_t tv = 0; tv < n_tan; ++tv)
                std::copy(init_tangents[tv].begin(), init_tangents[tv].end(),
                          tan.begin() + tv * dim);

            bool blown = false;
            size_t blown_step = 0;
            size_t gi = 0;

            for (size_t step = 0; step <= last_step; ++step) {
                // capture the state at this grid time before stepping past it
                while (gi < gsteps.size() && gsteps[gi] == step) {
                    if (!blown) {
                        for (double v : state)
                            if (!std::isfinite(v)) { blown = true; blown_step = step; break; }
                        if (!blown)
                            for (double v : tan)
                                if (!std::isfinite(v)) { blown = true; blown_step = step; break; }
                    }
                    if (!blown) {
                        BundleView view{state.data(), tan.data(), members, n_tan, dim,
                                        static_cast<double>(step) * cfg.dt};
                        qf(path, gi, view, quants.data());
                        for (size_t q = 0; q < n_quantities; ++q) {
                            if (!std::isfinite(quants[q])) { blown = true; blown_step = step; break; }
                        }
                        if (!blown) {
                            for (size_t q = 0; q < n_quantities; ++q) {
                                auto& cell = ca.cells[gi * n_quantities + q];
                                cell.n_ok += 1;
                                cell.sum += quants[q];
                                cell.sum_sq += quants[q] * quants[q];
                            }
                            if (store_raw)
                                std::copy(quants.begin(), quants.end(),
                                          res.raw.begin() + (path * gsteps.size() + gi) * n_quantities);
                        }
                    }
                    ++gi;
                }
                if (step == last_step || blown) break;

                if (cfg.noise_off)
                    std::fill(z.begin(), z.end(), 0.0);
                else
                    fill_normals(cfg.seed, path, step, cfg.channel_offset, z.data(), channels,
                                 cfg.salt);

                for (size_t mem = 0; mem < members; ++mem) {
                    double* x = state.data() + mem * dim;
                    const double* zm = z.data();
                    if (cfg.decouple_bundle && mem > 0) {
                        fill_normals(cfg.seed, path, step,
                                     cfg.channel_offset + mem * static_cast<uint64_t>(channels),
                                     zdec.data(), channels, cfg.salt);
                        zm = zdec.data();
                    }
                    if (cfg.scheme == Scheme::euler_ito) {
                        sys.drift(x, true, a0.data());
                        if (mem == 0 && n_tan) {
                            for (size_t tv = 0; tv < n_tan; ++tv) {
                                double* v = tan.data() + tv * dim;
                                sys.jvp_drift(x, v, true, ta0.data());
                                for (int p = 0; p < dim; ++p) ta0[p] *= cfg.dt;
                                sys.jvp_diffusion_add(x, v, zm, sq_dt, ta0.data());
                                for (int p = 0; p < dim; ++p) v[p] += ta0[p];
                            }
                        }
                        for (int p = 0; p < dim; ++p) d0[p] = 0;
                        sys.diffusion_add(x, zm, sq_dt, d0.data());
                        for (int p = 0; p < dim; ++p) x[p] += cfg.dt * a0[p] + d0[p];
                    } else {
                        // Heun predictor-corrector on the Stratonovich form
                        sys.drift(x, false, a0.data());
                        for (int p = 0; p < dim; ++p) d0[p] = 0;
                        sys.diffusion_add(x, zm, sq_dt, d0.data());
                        for (int p = 0; p < dim; ++p) pred[p] = x[p] + cfg.dt * a0[p] + d0[p];
                        sys.drift(pred.data(), false, a1.data());
                        for (int p = 0; p < dim; ++p) d1[p] = 0;
                        sys.diffusion_add(pred.data(), zm, sq_dt, d1.data());

                        if (mem == 0 && n_tan) {
                            for (size_t tv = 0; tv < n_tan; ++tv) {
                                double* v = tan.data() + tv * dim;
                                double* vp = tpred.data() + tv * dim;
                                sys.jvp_drift(x, v, false, ta0.data());
                                for (int p = 0; p < dim; ++p) td0[p] = 0;
                                sys.jvp_diffusion_add(x, v, zm, sq_dt, td0.data());
                                for (int p = 0; p < dim; ++p)
                                    vp[p] = v[p] + cfg.dt * ta0[p] + td0[p];
                                sys.jvp_drift(pred.data(), vp, false, ta1.data());
                                for (int p = 0; p < dim; ++p) td1[p] = 0;
                                sys.jvp_diffusion_add(pred.data(), vp, zm, sq_dt, td1.data());
                                for (int p = 0; p < dim; ++p)
                                    v[p] += 0.5 * cfg.dt * (ta0[p] + ta1[p]) + 0.5 * (td0[p] + td1[p]);
                            }
                        }
                        for (int p = 0; p < dim; ++p)
                            x[p] += 0.5 * cfg.dt * (a0[p] + a1[p]) + 0.5 * (d0[p] + d1[p]);
                    }
                }
            }

            if (blown) {
                ca.blown += 1;
                if (path < ca.first_blown_path) {
                    ca.first_blown_path = path;
                    ca.first_blown_step = blown_step;
                }
            }
        }
    });

    res.cells.assign(gsteps.size(), std::vector<EnsembleResult::Cell>(n_quantities));
    res.first_blown_path = SIZE_MAX;
    for (const ChunkAcc& ca : acc) {
        res.blown_paths += ca.blown;
        if (ca.first_blown_path < res.first_blown_path) {
            res.first_blown_path = ca.first_blown_path;
            res.first_blown_step = ca.first_blown_step;
        }
        for (size_t g = 0; g < gsteps.size(); ++g)
            for (size_t q = 0; q < n_quantities; ++q) {
                auto& dst = res.cells[g][q];
                const auto& src = ca.cells[g * n_quantities + q];
                dst.n_ok += src.n_ok;
                dst.sum += src.sum;
                dst.sum_sq += src.sum_sq;
            }
    }
    if (res.first_blown_path == SIZE_MAX) res.first_blown_path = 0;
    return res;
}

} // namespace hypo
