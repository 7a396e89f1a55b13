// Explicit decay constants for the gradient estimates: the spectral floor
// delta of I + G_sym, the bracket interaction constants C1..C4 and eta, the
// exponential rate kappa(beta) with its beta threshold, the optimal-pairing
// variant, the pointwise variant for slowly varying structure constants, and
// the L^q rate for the pure-diffusion case.
#pragma once

#include "hypocoerce/model.hpp"

#include <optional>

namespace hypo {

struct DeltaReport {
    double delta;      // smallest eigenvalue of I + (G + G^T)/2
    double residual;   // eigensolver residual
};

DeltaReport delta_of_G(const Mat& G);

struct ExactKappa {
    Rational slope;      // kappa(beta) = slope * beta + intercept
    Rational intercept;
    Rational threshold;  // beta above which kappa > 0
};

struct KappaReport {
    double beta = 0;
    double lambda_star = 0;
    double delta = 0;
    double delta_residual = 0;
    double C1 = 0, C2 = 0, C3 = 0, eta = 0;
    double kappa = 0;
    double beta_threshold = 0;
    // optimal variant only: the pairing alternative and the minimum used
    std::optional<double> C1_alt;
    // exact rational content, available when G = 0 and all alpha bounds vanish
    std::optional<ExactKappa> exact;
};

// kappa = 2 beta lambda_* - C1 - C2 - eta - C3/delta.
KappaReport kappa(const ModelSpec& model);

// Same with C1 replaced by min(C1, C1') where C1' = 2 sum c_{kjl}^2 comes
// from the alternative pairing of the bracket terms.
KappaReport kappa_optimal(const ModelSpec& model);

// Pointwise variant: structure "constants" are polynomials evaluated at a
// point, and the extra derivative term C4 enters the rate.
struct PointwiseModel {
    int n = 0, m = 0;
    int ambient = 0;
    std::vector<VectorField> X;     // m generator fields
    std::vector<Poly> c;            // n*m*n entries, row-major (k,j,l)
    double lambda_star = 1.0;
    double beta = 1.0;
    Mat G;
    std::vector<double> sup_alpha;
    std::vector<std::vector<double>> sup_Zalpha;  // n x m

    const Poly& at(int k, int j, int l) const {
        return c[(static_cast<size_t>(k) * m + j) * n + l];
    }
    static PointwiseModel from_model(const ModelSpec& model);  // constant tensor lift
};

struct PointwiseKappa {
    double C1, C2, C3, C4, eta, delta, kappa;
};

PointwiseKappa kappa_pointwise(const PointwiseModel& pm, std::span<const double> x);

// L^q decay rate for the pure-diffusion drift (G = 0, alpha = 0):
// kappa_q = q beta lambda_* - q P - (q/(q-1)) S with P the bracket-product
// pairing and S = sum c_{kil}^2.
struct LqReport {
    double q = 2;
    double beta = 0;
    double pairing = 0;     // P
    double square_sum = 0;  // S
    double kappa_q = 0;
    double beta_threshold = 0;
};

LqReport kappa_q(const Geometry& g, double beta, double q);

} // namespace hypo
