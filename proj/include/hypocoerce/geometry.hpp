// Catalog geometries: a sub-Riemannian frame Z_1..Z_n (first m are the
// generators X_1..X_m), a dilation field D with [Z_k, D] = lambda_k Z_k, and
// the structure constants [Z_k, X_j] = sum_l c_{kjl} Z_l.  Also the
// homogeneous gauge of the step-2 groups and the compactly-supported cutoff
// used as a Lyapunov-type function.
#pragma once

#include "hypocoerce/poly.hpp"

#include <string>
#include <vector>

namespace hypo {

struct Geometry {
    std::string name;
    int N = 0;  // ambient dimension
    int m = 0;  // generators
    int n = 0;  // frame size
    std::vector<VectorField> Z;   // frame; Z[0..m-1] are the generators
    std::vector<VectorField> bracket_basis() const { return Z; }
    VectorField D;                // dilation field
    std::vector<Rational> lambda; // [Z_k, D] = lambda_k Z_k
    StructureTensor c;

    const VectorField& X(int j) const { return Z[j]; }
    double lambda_star() const;
    Rational lambda_star_exact() const;

    // Recomputes structure constants and dilation eigenvalues from the
    // fields and checks them against the stored data; throws on mismatch.
    void validate() const;
};

Geometry heisenberg();
Geometry grusin();
Geometry martinet();
Geometry abelian(int n);
Geometry geometry_by_name(const std::string& name);  // "abelian:N" selects the dimension

// Homogeneous gauge of the step-2 group with m generators (m even) and a
// one-dimensional center: N(x,t) = (|x|^4 + 16 t^2)^(1/4).  The generator
// fields are X_i = d/dx_i -+ (x_pair/2) d/dt with the symplectic pairing
// (2a-1, 2a).  All derivatives are evaluated from closed-form partials of N,
// assembled through the fields; the caller can compare them against the
// algebraic identities |grad N|^2 = |x|^2/N^2, sum X_i^2 N = (m+1)|x|^2/N^3,
// D N = N.
struct HTypeGauge {
    int m = 2;  // even

    explicit HTypeGauge(int m_);

    int ambient_dim() const { return m + 1; }

    double value(std::span<const double> p) const;        // N(x,t)
    double xi_n(std::span<const double> p, int i) const;  // X_i N
    double xi2_n(std::span<const double> p, int i) const; // X_i X_i N
    double xixj_n(std::span<const double> p, int i, int j) const;
    double dilation_n(std::span<const double> p) const;   // D N

    struct Identities {
        double value;      // N
        double subgrad;    // sum_i |X_i N|^2
        double sublap;     // sum_i X_i^2 N
        double dilation;   // D N
    };
    Identities identities(std::span<const double> p) const;

private:
    double pair_weight(std::span<const double> p, int i) const;  // the d/dt coefficient of X_i
};

// Quintic transition g with g=0 on [0,1], g=x on [2,inf), C^2 across both
// knots, monotone, and 0 <= g <= x.  rho = g(N) is the bounded-derivative
// radial function used in the Lyapunov-type checks.
struct CutoffRho {
    static double g(double x);
    static double dg(double x);
    static double d2g(double x);
};

struct GaugeDerivs {
    double rho;
    double subgrad;   // sum_i |X_i rho|^2
    double sublap;    // sum_i X_i^2 rho
};

// rho and its frame derivatives for the gauge on the step-2 group; gmat adds
// the cross terms sum_{ij} G_ij X_i X_j rho when non-null (m x m, row-major).
GaugeDerivs cutoff_derivs(const HTypeGauge& gauge, std::span<const double> p,
                          const double* gmat = nullptr);

} // namespace hypo
