// Multivariate polynomials over the rationals and polynomial vector fields.
// Supports the symbolic side of the pipeline: Lie brackets, exact
// constant-coefficient decompositions, structure constants and dilation
// eigenvalues.
#pragma once

#include "hypocoerce/rational.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hypo {

// Graded lexicographic order on exponent multi-indices: total degree first,
// then lexicographic.  Fixes the canonical term order used everywhere,
// including serialization.
struct GradedLex {
    bool operator()(const std::vector<int>& a, const std::vector<int>& b) const;
};

class Poly {
public:
    static constexpr int kMaxDegree = 16;

    Poly() = default;
    explicit Poly(int nvars) : nvars_(nvars) {}

    static Poly constant(int nvars, const Rational& c);
    static Poly variable(int nvars, int i);

    int nvars() const { return nvars_; }
    bool is_zero() const { return terms_.empty(); }
    int degree() const;  // total degree, -1 for the zero polynomial
    bool is_constant() const { return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first == std::vector<int>(nvars_, 0)); }

    Rational coeff(const std::vector<int>& mono) const;
    void set_coeff(const std::vector<int>& mono, const Rational& c);

    const std::map<std::vector<int>, Rational, GradedLex>& terms() const { return terms_; }

    Poly operator-() const;
    friend Poly operator+(const Poly& a, const Poly& b);
    friend Poly operator-(const Poly& a, const Poly& b);
    friend Poly operator*(const Poly& a, const Poly& b);
    Poly& operator+=(const Poly& o) { return *this = *this + o; }
    Poly& operator-=(const Poly& o) { return *this = *this - o; }

    Poly scaled(const Rational& c) const;
    Poly partial(int i) const;  // d/dx_i

    Rational eval(std::span<const Rational> x) const;
    double eval(std::span<const double> x) const;

    friend bool operator==(const Poly& a, const Poly& b) {
        return a.nvars_ == b.nvars_ && a.terms_ == b.terms_;
    }
    friend bool operator!=(const Poly& a, const Poly& b) { return !(a == b); }

    std::string str() const;  // human-readable, canonical order

private:
    void check_compatible(const Poly& o) const;
    void insert(const std::vector<int>& mono, const Rational& c);

    int nvars_ = 0;
    std::map<std::vector<int>, Rational, GradedLex> terms_;
};

// First-order differential operator sum_i comp[i] * d/dx_i with polynomial
// coefficients.
struct VectorField {
    int dim = 0;
    std::vector<Poly> comp;

    VectorField() = default;
    explicit VectorField(int n) : dim(n), comp(n, Poly(n)) {}

    bool is_zero() const;
    Poly apply(const Poly& f) const;                 // V f
    void eval(std::span<const double> x, std::span<double> out) const;
    std::vector<Rational> eval(std::span<const Rational> x) const;

    friend bool operator==(const VectorField& a, const VectorField& b) {
        return a.dim == b.dim && a.comp == b.comp;
    }
    friend bool operator!=(const VectorField& a, const VectorField& b) { return !(a == b); }
};

VectorField operator+(const VectorField& a, const VectorField& b);
VectorField operator-(const VectorField& a, const VectorField& b);
VectorField scaled(const VectorField& v, const Rational& c);

// Lie bracket [V,W] = V(W) - W(V), again a first-order polynomial field.
VectorField lie_bracket(const VectorField& v, const VectorField& w);

// Exact decomposition w = sum_l c_l basis[l] with constant rational c_l.
// Returns nullopt when no constant-coefficient decomposition exists.  Throws
// std::invalid_argument when the basis is linearly dependent over the
// rationals (the decomposition would be ambiguous).
std::optional<std::vector<Rational>> decompose_constant(
    const VectorField& w, const std::vector<VectorField>& basis);

// c[k][j][l] with [Z_k, X_j] = sum_l c_{kjl} Z_l, flattened row-major.
struct StructureTensor {
    int n = 0;  // number of frame fields Z_k
    int m = 0;  // number of generators X_j (a prefix of the frame)
    std::vector<Rational> c;

    StructureTensor() = default;
    StructureTensor(int n_, int m_) : n(n_), m(m_), c(static_cast<size_t>(n_) * m_ * n_) {}

    Rational& at(int k, int j, int l) { return c[(static_cast<size_t>(k) * m + j) * n + l]; }
    const Rational& at(int k, int j, int l) const { return c[(static_cast<size_t>(k) * m + j) * n + l]; }
};

struct StructureResult {
    std::optional<StructureTensor> tensor;
    int failed_k = -1, failed_j = -1;  // witness bracket when tensor is empty
    bool ok() const { return tensor.has_value(); }
};

// Brackets of every frame field against the first m frame fields; fails with
// a witness when some bracket leaves the constant-coefficient span.
StructureResult structure_constants(const std::vector<VectorField>& frame, int m);

struct DilationResult {
    std::optional<std::vector<Rational>> lambda;
    int failed_k = -1;
    bool ok() const { return lambda.has_value(); }
};

// Eigenvalues lambda_k > 0 with [Z_k, D] = lambda_k Z_k; fails with the first
// k violating proportionality or positivity.
DilationResult dilation_eigenvalues(const std::vector<VectorField>& frame, const VectorField& dilation);

} // namespace hypo
