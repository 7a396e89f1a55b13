// Closed observable language: constants, coordinates, sums, products, integer
// powers, tanh, sin and exp(-u).  Supports pointwise evaluation along
// trajectories, exact symbolic differentiation (for frame derivatives and the
// carre-du-champ), and a conservative certified sup-norm bound.
#pragma once

#include "hypocoerce/poly.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hypo {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind { Const, Var, Add, Mul, Pow, Tanh, Sin, ExpNeg };
    Kind kind;
    double value = 0;    // Const
    int index = 0;       // Var: coordinate; Pow: exponent (>= 0)
    std::vector<ExprPtr> kids;
};

class Observable {
public:
    Observable() = default;
    Observable(ExprPtr root, int nvars) : root_(std::move(root)), nvars_(nvars) {}

    bool empty() const { return !root_; }
    int nvars() const { return nvars_; }
    const ExprPtr& root() const { return root_; }

    double eval(std::span<const double> x) const;
    Observable diff(int i) const;

    // |f| <= bound everywhere when a bound can be certified; conservative.
    std::optional<double> certified_bound() const;

    std::string str() const;

private:
    ExprPtr root_;
    int nvars_ = 0;
};

namespace obs {

Observable constant(int nvars, double c);
Observable var(int nvars, int i);
Observable add(const Observable& a, const Observable& b);
Observable mul(const Observable& a, const Observable& b);
Observable pow(const Observable& a, int k);
Observable tanh(const Observable& a);
Observable sin(const Observable& a);
Observable exp_neg(const Observable& a);  // exp(-a)
Observable neg(const Observable& a);
Observable sub(const Observable& a, const Observable& b);

// Lift a polynomial with rational coefficients into the observable language.
Observable from_poly(const Poly& p);

} // namespace obs

// Grammar: expr := term (('+'|'-') term)*, term := unary ('*' unary)*,
// unary := '-' unary | factor, factor := base ('^' uint)?,
// base := number | coordinate | fn '(' expr ')' | '(' expr ')'.
// Coordinates: x1..xN, with x,y,z,w as aliases for x1..x4.
// Functions: sin, tanh, expneg.
Observable parse_observable(const std::string& text, int nvars);

// Frame derivative Z f as an observable (field coefficients become
// polynomial factors).
Observable frame_derivative(const VectorField& z, const Observable& f);

// Complete carre du champ: sum_k |Z_k f|^2 over the whole frame.
Observable carre_du_champ(const std::vector<VectorField>& frame, const Observable& f);

} // namespace hypo
