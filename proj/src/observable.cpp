#include "hypocoerce/observable.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace hypo {

namespace {

ExprPtr make_const(double v) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Const;
    e->value = v;
    return e;
}

bool is_const(const ExprPtr& e, double v) {
    return e->kind == Expr::Kind::Const && e->value == v;
}

double eval_node(const Expr& e, std::span<const double> x) {
    switch (e.kind) {
        case Expr::Kind::Const: return e.value;
        case Expr::Kind::Var: return x[e.index];
        case Expr::Kind::Add: {
            double s = 0;
            for (const auto& k : e.kids) s += eval_node(*k, x);
            return s;
        }
        case Expr::Kind::Mul: {
            double s = 1;
            for (const auto& k : e.kids) s *= eval_node(*k, x);
            return s;
        }
        case Expr::Kind::Pow: {
            double b = eval_node(*e.kids[0], x);
            double r = 1;
            for (int i = 0; i < e.index; ++i) r *= b;
            return r;
        }
        case Expr::Kind::Tanh: return std::tanh(eval_node(*e.kids[0], x));
        case Expr::Kind::Sin: return std::sin(eval_node(*e.kids[0], x));
        case Expr::Kind::ExpNeg: return std::exp(-eval_node(*e.kids[0], x));
    }
    return 0;
}

// Conservative interval-free certificates: |e| <= bound(e), e >= 0 when
// nonneg(e).
std::optional<double> bound_node(const Expr& e);

bool nonneg_node(const Expr& e) {
    switch (e.kind) {
        case Expr::Kind::Const: return e.value >= 0;
        case Expr::Kind::Var: return false;
        case Expr::Kind::Add:
        case Expr::Kind::Mul: {
            for (const auto& k : e.kids)
                if (!nonneg_node(*k)) return false;
            return true;
        }
        case Expr::Kind::Pow: return e.index % 2 == 0 || nonneg_node(*e.kids[0]);
        case Expr::Kind::Tanh: return nonneg_node(*e.kids[0]);
        case Expr::Kind::Sin: return false;
        case Expr::Kind::ExpNeg: return true;
    }
    return false;
}

std::optional<double> bound_node(const Expr& e) {
    switch (e.kind) {
        case Expr::Kind::Const: return std::abs(e.value);
        case Expr::Kind::Var: return std::nullopt;
        case Expr::Kind::Add: {
            double s = 0;
            for (const auto& k : e.kids) {
                auto b = bound_node(*k);
                if (!b) return std::nullopt;
                s += *b;
            }
            return s;
        }
        case Expr::Kind::Mul: {
            double s = 1;
            for (const auto& k : e.kids) {
                auto b = bound_node(*k);
                if (!b) return std::nullopt;
                s *= *b;
            }
            return s;
        }
        case Expr::Kind::Pow: {
            auto b = bound_node(*e.kids[0]);
            if (!b) return std::nullopt;
            double r = 1;
            for (int i = 0; i < e.index; ++i) r *= *b;
            return r;
        }
        case Expr::Kind::Tanh:
        case Expr::Kind::Sin: return 1.0;
        case Expr::Kind::ExpNeg:
            if (nonneg_node(*e.kids[0])) return 1.0;
            return std::nullopt;
    }
    return std::nullopt;
}

void print_node(const Expr& e, std::ostream& os) {
    switch (e.kind) {
        case Expr::Kind::Const: os << e.value; break;
        case Expr::Kind::Var: os << "x" << (e.index + 1); break;
        case Expr::Kind::Add: {
            os << "(";
            for (size_t i = 0; i < e.kids.size(); ++i) {
                if (i) os << " + ";
                print_node(*e.kids[i], os);
            }
            os << ")";
            break;
        }
        case Expr::Kind::Mul: {
            os << "(";
            for (size_t i = 0; i < e.kids.size(); ++i) {
                if (i) os << "*";
                print_node(*e.kids[i], os);
            }
            os << ")";
            break;
        }
        case Expr::Kind::Pow:
            print_node(*e.kids[0], os);
            os << "^" << e.index;
            break;
        case Expr::Kind::Tanh: os << "tanh("; print_node(*e.kids[0], os); os << ")"; break;
        case Expr::Kind::Sin: os << "sin("; print_node(*e.kids[0], os); os << ")"; break;
        case Expr::Kind::ExpNeg: os << "expneg("; print_node(*e.kids[0], os); os << ")"; break;
    }
}

} // namespace

double Observable::eval(std::span<const double> x) const {
    if (!root_) return 0;
    return eval_node(*root_, x);
}

std::optional<double> Observable::certified_bound() const {
    if (!root_) return 0.0;
    return bound_node(*root_);
}

std::string Observable::str() const {
    if (!root_) return "0";
    std::ostringstream os;
    print_node(*root_, os);
    return os.str();
}

namespace obs {

Observable constant(int nvars, double c) { return Observable(make_const(c), nvars); }

Observable var(int nvars, int i) {
    if (i < 0 || i >= nvars) throw std::out_of_range("observable coordinate index");
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Var;
    e->index = i;
    return Observable(e, nvars);
}

Observable add(const Observable& a, const Observable& b) {
    if (a.nvars() != b.nvars()) throw std::invalid_argument("observable arity mismatch");
    if (is_const(a.root(), 0.0)) return b;
    if (is_const(b.root(), 0.0)) return a;
    if (a.root()->kind == Expr::Kind::Const && b.root()->kind == Expr::Kind::Const)
        return constant(a.nvars(), a.root()->value + b.root()->value);
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Add;
    e->kids = {a.root(), b.root()};
    return Observable(e, a.nvars());
}

Observable mul(const Observable& a, const Observable& b) {
    if (a.nvars() != b.nvars()) throw std::invalid_argument("observable arity mismatch");
    if (is_const(a.root(), 0.0) || is_const(b.root(), 0.0)) return constant(a.nvars(), 0.0);
    if (is_const(a.root(), 1.0)) return b;
    if (is_const(b.root(), 1.0)) return a;
    if (a.root()->kind == Expr::Kind::Const && b.root()->kind == Expr::Kind::Const)
        return constant(a.nvars(), a.root()->value * b.root()->value);
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Mul;
    e->kids = {a.root(), b.root()};
    return Observable(e, a.nvars());
}

Observable pow(const Observable& a, int k) {
    if (k < 0) throw std::invalid_argument("negative observable exponent");
    if (k == 0) return constant(a.nvars(), 1.0);
    if (k == 1) return a;
    if (a.root()->kind == Expr::Kind::Const) {
        double r = 1;
        for (int i = 0; i < k; ++i) r *= a.root()->value;
        return constant(a.nvars(), r);
    }
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Pow;
    e->index = k;
    e->kids = {a.root()};
    return Observable(e, a.nvars());
}

namespace {

Observable unary(Expr::Kind kind, const Observable& a) {
    auto e = std::make_shared<Expr>();
    e->kind = kind;
    e->kids = {a.root()};
    return Observable(e, a.nvars());
}

} // namespace

Observable tanh(const Observable& a) {
    if (a.root()->kind == Expr::Kind::Const) return constant(a.nvars(), std::tanh(a.root()->value));
    return unary(Expr::Kind::Tanh, a);
}

Observable sin(const Observable& a) {
    if (a.root()->kind == Expr::Kind::Const) return constant(a.nvars(), std::sin(a.root()->value));
    return unary(Expr::Kind::Sin, a);
}

Observable exp_neg(const Observable& a) {
    if (a.root()->kind == Expr::Kind::Const) return constant(a.nvars(), std::exp(-a.root()->value));
    return unary(Expr::Kind::ExpNeg, a);
}

Observable neg(const Observable& a) { return mul(constant(a.nvars(), -1.0), a); }

Observable sub(const Observable& a, const Observable& b) { return add(a, neg(b)); }

Observable from_poly(const Poly& p) {
    int nv = p.nvars();
    Observable acc = constant(nv, 0.0);
    for (const auto& [mono, c] : p.terms()) {
        Observable term = constant(nv, c.to_double());
        for (int i = 0; i < nv; ++i)
            if (mono[i] > 0) term = mul(term, pow(var(nv, i), mono[i]));
        acc = add(acc, term);
    }
    return acc;
}

} // namespace obs

Observable Observable::diff(int i) const {
    if (!root_) return obs::constant(nvars_, 0.0);
    const Expr& e = *root_;
    auto wrap = [&](const ExprPtr& p) { return Observable(p, nvars_); };
    switch (e.kind) {
        case Expr::Kind::Const: return obs::constant(nvars_, 0.0);
        case Expr::Kind::Var: return obs::constant(nvars_, e.index == i ? 1.0 : 0.0);
        case Expr::Kind::Add: {
            Observable acc = obs::constant(nvars_, 0.0);
            for (const auto& k : e.kids) acc = obs::add(acc, wrap(k).diff(i));
            return acc;
        }
        case Expr::Kind::Mul: {
            Observable acc = obs::constant(nvars_, 0.0);
            for (size_t j = 0; j < e.kids.size(); ++j) {
                Observable term = wrap(e.kids[j]).diff(i);
                for (size_t l = 0; l < e.kids.size(); ++l)
                    if (l != j) term = obs::mul(term, wrap(e.kids[l]));
                acc = obs::add(acc, term);
            }
            return acc;
        }
        case Expr::Kind::Pow: {
            Observable base = wrap(e.kids[0]);
            return obs::mul(obs::mul(obs::constant(nvars_, e.index), obs::pow(base, e.index - 1)),
                            base.diff(i));
        }
        case Expr::Kind::Tanh: {
            Observable u = wrap(e.kids[0]);
            Observable d = obs::sub(obs::constant(nvars_, 1.0), obs::pow(obs::tanh(u), 2));
            return obs::mul(d, u.diff(i));
        }
        case Expr::Kind::Sin: {
            // cos u = sin(u + pi/2) keeps the language closed
            Observable u = wrap(e.kids[0]);
            Observable cosu = obs::sin(obs::add(u, obs::constant(nvars_, std::numbers::pi / 2)));
            return obs::mul(cosu, u.diff(i));
        }
        case Expr::Kind::ExpNeg: {
            Observable u = wrap(e.kids[0]);
            return obs::mul(obs::mul(obs::constant(nvars_, -1.0), obs::exp_neg(u)), u.diff(i));
        }
    }
    return obs::constant(nvars_, 0.0);
}

namespace {

struct Parser {
    const std::string& s;
    size_t pos = 0;
    int nvars;

    void skip_ws() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < s.size() && s[pos] == c) { ++pos; return true; }
        return false;
    }

    [[noreturn]] void fail(const std::string& what) {
        throw std::invalid_argument("observable parse error at position " +
                                    std::to_string(pos) + ": " + what);
    }

    Observable expr() {
        Observable acc = term();
        for (;;) {
            skip_ws();
            if (eat('+')) acc = obs::add(acc, term());
            else if (eat('-')) acc = obs::sub(acc, term());
            else return acc;
        }
    }

    Observable term() {
        Observable acc = unary();
        for (;;) {
            skip_ws();
            if (eat('*')) acc = obs::mul(acc, unary());
            else return acc;
        }
    }

    Observable unary() {
        skip_ws();
        if (eat('-')) return obs::neg(unary());
        return factor();
    }

    Observable factor() {
        Observable b = base();
        skip_ws();
        if (eat('^')) {
            skip_ws();
            size_t start = pos;
            while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
            if (pos == start) fail("expected integer exponent");
            return obs::pow(b, std::stoi(s.substr(start, pos - start)));
        }
        return b;
    }

    Observable base() {
        skip_ws();
        if (pos >= s.size()) fail("unexpected end of input");
        char c = s[pos];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            size_t used = 0;
            double v = std::stod(s.substr(pos), &used);
            pos += used;
            return obs::constant(nvars, v);
        }
        if (c == '(') {
            ++pos;
            Observable e = expr();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos;
            while (pos < s.size() &&
                   (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
                ++pos;
            std::string id = s.substr(start, pos - start);
            if (id == "sin" || id == "tanh" || id == "expneg" || id == "exp_neg") {
                if (!eat('(')) fail("expected '(' after " + id);
                Observable arg = expr();
                if (!eat(')')) fail("expected ')'");
                if (id == "sin") return obs::sin(arg);
                if (id == "tanh") return obs::tanh(arg);
                return obs::exp_neg(arg);
            }
            int idx = -1;
            if (id.size() >= 2 && id[0] == 'x' && std::isdigit(static_cast<unsigned char>(id[1]))) {
                idx = std::stoi(id.substr(1)) - 1;
            } else if (id == "x") idx = 0;
            else if (id == "y") idx = 1;
            else if (id == "z") idx = 2;
            else if (id == "w") idx = 3;
            if (idx < 0) fail("unknown identifier '" + id + "'");
            if (idx >= nvars)
                fail("coordinate '" + id + "' exceeds dimension " + std::to_string(nvars));
            return obs::var(nvars, idx);
        }
        fail(std::string("unexpected character '") + c + "'");
    }
};

} // namespace

Observable parse_observable(const std::string& text, int nvars) {
    Parser p{text, 0, nvars};
    Observable e = p.expr();
    p.skip_ws();
    if (p.pos != text.size()) p.fail("trailing input");
    return e;
}

Observable frame_derivative(const VectorField& z, const Observable& f) {
    if (z.dim != f.nvars()) throw std::invalid_argument("field/observable arity mismatch");
    Observable acc = obs::constant(f.nvars(), 0.0);
    for (int p = 0; p < z.dim; ++p) {
        if (z.comp[p].is_zero()) continue;
        acc = obs::add(acc, obs::mul(obs::from_poly(z.comp[p]), f.diff(p)));
    }
    return acc;
}

Observable carre_du_champ(const std::vector<VectorField>& frame, const Observable& f) {
    Observable acc = obs::constant(f.nvars(), 0.0);
    for (const auto& z : frame) acc = obs::add(acc, obs::pow(frame_derivative(z, f), 2));
    return acc;
}

} // namespace hypo
