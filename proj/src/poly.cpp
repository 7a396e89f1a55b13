#include "hypocoerce/poly.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hypo {

bool GradedLex::operator()(const std::vector<int>& a, const std::vector<int>& b) const {
    int da = std::accumulate(a.begin(), a.end(), 0);
    int db = std::accumulate(b.begin(), b.end(), 0);
    if (da != db) return da < db;
    return a < b;
}

Poly Poly::constant(int nvars, const Rational& c) {
    Poly p(nvars);
    p.insert(std::vector<int>(nvars, 0), c);
    return p;
}

Poly Poly::variable(int nvars, int i) {
    if (i < 0 || i >= nvars) throw std::out_of_range("variable index");
    Poly p(nvars);
    std::vector<int> mono(nvars, 0);
    mono[i] = 1;
    p.insert(mono, Rational(1));
    return p;
}

int Poly::degree() const {
    if (terms_.empty()) return -1;
    // graded order: the last term has maximal total degree
    const auto& mono = terms_.rbegin()->first;
    return std::accumulate(mono.begin(), mono.end(), 0);
}

Rational Poly::coeff(const std::vector<int>& mono) const {
    auto it = terms_.find(mono);
    return it == terms_.end() ? Rational(0) : it->second;
}

void Poly::set_coeff(const std::vector<int>& mono, const Rational& c) {
    if (static_cast<int>(mono.size()) != nvars_) throw std::invalid_argument("monomial arity mismatch");
    if (std::accumulate(mono.begin(), mono.end(), 0) > kMaxDegree)
        throw std::domain_error("polynomial degree cap exceeded");
    if (c.is_zero())
        terms_.erase(mono);
    else
        terms_[mono] = c;
}

void Poly::insert(const std::vector<int>& mono, const Rational& c) {
    if (c.is_zero()) return;
    auto [it, fresh] = terms_.emplace(mono, c);
    if (!fresh) {
        it->second += c;
        if (it->second.is_zero()) terms_.erase(it);
    }
}

void Poly::check_compatible(const Poly& o) const {
    if (nvars_ != o.nvars_) throw std::invalid_argument("polynomial arity mismatch");
}

Poly Poly::operator-() const {
    Poly r(nvars_);
    for (const auto& [mono, c] : terms_) r.terms_.emplace(mono, -c);
    return r;
}

Poly operator+(const Poly& a, const Poly& b) {
    a.check_compatible(b);
    Poly r = a;
    for (const auto& [mono, c] : b.terms_) r.insert(mono, c);
    return r;
}

Poly operator-(const Poly& a, const Poly& b) { return a + (-b); }

Poly operator*(const Poly& a, const Poly& b) {
    a.check_compatible(b);
    Poly r(a.nvars_);
    std::vector<int> mono(a.nvars_);
    for (const auto& [ma, ca] : a.terms_) {
        for (const auto& [mb, cb] : b.terms_) {
            int deg = 0;
            for (int i = 0; i < a.nvars_; ++i) {
                mono[i] = ma[i] + mb[i];
                deg += mono[i];
            }
            if (deg > Poly::kMaxDegree)
                throw std::domain_error("polynomial degree cap exceeded");
            r.insert(mono, ca * cb);
        }
    }
    return r;
}

Poly Poly::scaled(const Rational& c) const {
    Poly r(nvars_);
    if (c.is_zero()) return r;
    for (const auto& [mono, v] : terms_) r.terms_.emplace(mono, v * c);
    return r;
}

Poly Poly::partial(int i) const {
    if (i < 0 || i >= nvars_) throw std::out_of_range("partial index");
    Poly r(nvars_);
    for (const auto& [mono, c] : terms_) {
        if (mono[i] == 0) continue;
        std::vector<int> m = mono;
        m[i] -= 1;
        r.insert(m, c * Rational(mono[i]));
    }
    return r;
}

Rational Poly::eval(std::span<const Rational> x) const {
    if (static_cast<int>(x.size()) != nvars_) throw std::invalid_argument("point arity mismatch");
    Rational acc(0);
    for (const auto& [mono, c] : terms_) {
        Rational t = c;
        for (int i = 0; i < nvars_; ++i)
            for (int e = 0; e < mono[i]; ++e) t *= x[i];
        acc += t;
    }
    return acc;
}

double Poly::eval(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != nvars_) throw std::invalid_argument("point arity mismatch");
    double acc = 0;
    for (const auto& [mono, c] : terms_) {
        double t = c.to_double();
        for (int i = 0; i < nvars_; ++i)
            for (int e = 0; e < mono[i]; ++e) t *= x[i];
        acc += t;
    }
    return acc;
}

std::string Poly::str() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [mono, c] : terms_) {
        if (!first) os << " + ";
        first = false;
        os << c.str();
        for (int i = 0; i < nvars_; ++i) {
            if (mono[i] == 0) continue;
            os << "*x" << (i + 1);
            if (mono[i] > 1) os << "^" << mono[i];
        }
    }
    return os.str();
}

bool VectorField::is_zero() const {
    return std::all_of(comp.begin(), comp.end(), [](const Poly& p) { return p.is_zero(); });
}

Poly VectorField::apply(const Poly& f) const {
    if (f.nvars() != dim) throw std::invalid_argument("field/function arity mismatch");
    Poly r(dim);
    for (int i = 0; i < dim; ++i) {
        if (comp[i].is_zero()) continue;
        r += comp[i] * f.partial(i);
    }
    return r;
}

void VectorField::eval(std::span<const double> x, std::span<double> out) const {
    for (int i = 0; i < dim; ++i) out[i] = comp[i].eval(x);
}

std::vector<Rational> VectorField::eval(std::span<const Rational> x) const {
    std::vector<Rational> out(dim);
    for (int i = 0; i < dim; ++i) out[i] = comp[i].eval(x);
    return out;
}

VectorField operator+(const VectorField& a, const VectorField& b) {
    if (a.dim != b.dim) throw std::invalid_argument("field arity mismatch");
    VectorField r(a.dim);
    for (int i = 0; i < a.dim; ++i) r.comp[i] = a.comp[i] + b.comp[i];
    return r;
}

VectorField operator-(const VectorField& a, const VectorField& b) {
    if (a.dim != b.dim) throw std::invalid_argument("field arity mismatch");
    VectorField r(a.dim);
    for (int i = 0; i < a.dim; ++i) r.comp[i] = a.comp[i] - b.comp[i];
    return r;
}

VectorField scaled(const VectorField& v, const Rational& c) {
    VectorField r(v.dim);
    for (int i = 0; i < v.dim; ++i) r.comp[i] = v.comp[i].scaled(c);
    return r;
}

VectorField lie_bracket(const VectorField& v, const VectorField& w) {
    if (v.dim != w.dim) throw std::invalid_argument("field arity mismatch");
    VectorField r(v.dim);
    for (int i = 0; i < v.dim; ++i)
        r.comp[i] = v.apply(w.comp[i]) - w.apply(v.comp[i]);
    return r;
}

namespace {

// Exact Gaussian elimination on the linear system A c = b assembled from the
// monomial coefficients of the candidate decomposition.
struct RationalSolve {
    // rows: one per (component, monomial) pair; cols: one per basis field
    std::vector<std::vector<Rational>> a;
    std::vector<Rational> b;

    // Returns nullopt when inconsistent; throws when the solution is not
    // unique (rank-deficient basis).
    std::optional<std::vector<Rational>> solve(size_t ncols) {
        size_t nrows = a.size();
        std::vector<size_t> pivot_col;
        size_t row = 0;
        for (size_t col = 0; col < ncols && row < nrows; ++col) {
            size_t sel = row;
            while (sel < nrows && a[sel][col].is_zero()) ++sel;
            if (sel == nrows) continue;
            std::swap(a[sel], a[row]);
            std::swap(b[sel], b[row]);
            Rational inv = Rational(1) / a[row][col];
            for (size_t c = col; c < ncols; ++c) a[row][c] *= inv;
            b[row] *= inv;
            for (size_t r = 0; r < nrows; ++r) {
                if (r == row || a[r][col].is_zero()) continue;
                Rational f = a[r][col];
                for (size_t c = col; c < ncols; ++c) a[r][c] -= f * a[row][c];
                b[r] -= f * b[row];
            }
            pivot_col.push_back(col);
            ++row;
        }
        if (pivot_col.size() < ncols)
            throw std::invalid_argument("basis fields are linearly dependent over the rationals");
        for (size_t r = row; r < nrows; ++r)
            if (!b[r].is_zero()) return std::nullopt;  // inconsistent: no decomposition
        std::vector<Rational> x(ncols);
        for (size_t r = 0; r < row; ++r) x[pivot_col[r]] = b[r];
        return x;
    }
};

} // namespace

std::optional<std::vector<Rational>> decompose_constant(
    const VectorField& w, const std::vector<VectorField>& basis) {
    if (basis.empty()) throw std::invalid_argument("empty basis");
    int dim = w.dim;
    for (const auto& z : basis)
        if (z.dim != dim) throw std::invalid_argument("field arity mismatch");

    // collect the monomials appearing in any component of w or the basis
    std::map<std::pair<int, std::vector<int>>, size_t> row_of;
    auto note = [&](const VectorField& f) {
        for (int i = 0; i < dim; ++i)
            for (const auto& [mono, c] : f.comp[i].terms())
                row_of.emplace(std::make_pair(i, mono), row_of.size());
    };
    note(w);
    for (const auto& z : basis) note(z);

    RationalSolve sys;
    sys.a.assign(row_of.size(), std::vector<Rational>(basis.size(), Rational(0)));
    sys.b.assign(row_of.size(), Rational(0));
    for (size_t l = 0; l < basis.size(); ++l)
        for (int i = 0; i < dim; ++i)
            for (const auto& [mono, c] : basis[l].comp[i].terms())
                sys.a[row_of.at({i, mono})][l] = c;
    for (int i = 0; i < dim; ++i)
        for (const auto& [mono, c] : w.comp[i].terms())
            sys.b[row_of.at({i, mono})] = c;

    return sys.solve(basis.size());
}

StructureResult structure_constants(const std::vector<VectorField>& frame, int m) {
    StructureResult res;
    int n = static_cast<int>(frame.size());
    if (m < 0 || m > n) throw std::invalid_argument("generator count out of range");
    StructureTensor t(n, m);
    for (int k = 0; k < n; ++k) {
        for (int j = 0; j < m; ++j) {
            VectorField br = lie_bracket(frame[k], frame[j]);
            auto coeffs = decompose_constant(br, frame);
            if (!coeffs) {
                res.failed_k = k;
                res.failed_j = j;
                return res;
            }
            for (int l = 0; l < n; ++l) t.at(k, j, l) = (*coeffs)[l];
        }
    }
    res.tensor = std::move(t);
    return res;
}

DilationResult dilation_eigenvalues(const std::vector<VectorField>& frame, const VectorField& dilation) {
    DilationResult res;
    std::vector<Rational> lambda(frame.size());
    for (size_t k = 0; k < frame.size(); ++k) {
        VectorField br = lie_bracket(frame[k], dilation);
        auto coeffs = decompose_constant(br, frame);
        bool ok = coeffs.has_value();
        if (ok) {
            for (size_t l = 0; l < frame.size(); ++l)
                if (l != k && !(*coeffs)[l].is_zero()) ok = false;
            if (ok) {
                lambda[k] = (*coeffs)[k];
                if (!(lambda[k] > Rational(0))) ok = false;
            }
        }
        if (!ok) {
            res.failed_k = static_cast<int>(k);
            return res;
        }
    }
    res.lambda = std::move(lambda);
    return res;
}

} // namespace hypo
