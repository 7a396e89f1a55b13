#include "hypocoerce/model.hpp"

#include <cmath>
#include <stdexcept>

namespace hypo {

bool AlphaSpec::is_zero() const {
    for (const auto& f : funcs)
        if (!f.empty()) return false;
    return true;
}

AlphaSpec AlphaSpec::zero(const Geometry& g) {
    AlphaSpec a;
    a.funcs.resize(g.m);
    a.sup_alpha.assign(g.m, 0.0);
    a.sup_Zalpha.assign(g.n, std::vector<double>(g.m, 0.0));
    return a;
}

AlphaSpec AlphaSpec::tanh_first(const Geometry& g, const std::vector<double>& amplitudes) {
    if (static_cast<int>(amplitudes.size()) != g.m)
        throw std::invalid_argument("need one amplitude per generator");
    std::vector<double> first_comp(g.n);
    for (int k = 0; k < g.n; ++k) {
        const Poly& p = g.Z[k].comp[0];
        if (!p.is_constant())
            throw std::invalid_argument("tanh_first preset needs constant first components in the frame");
        first_comp[k] = p.is_zero() ? 0.0 : p.coeff(std::vector<int>(g.N, 0)).to_double();
    }
    AlphaSpec a;
    a.sup_alpha.resize(g.m);
    a.sup_Zalpha.assign(g.n, std::vector<double>(g.m, 0.0));
    for (int i = 0; i < g.m; ++i) {
        double amp = amplitudes[i];
        a.funcs.push_back(amp == 0.0
                              ? Observable()
                              : obs::mul(obs::constant(g.N, amp), obs::tanh(obs::var(g.N, 0))));
        a.sup_alpha[i] = std::abs(amp);
        for (int k = 0; k < g.n; ++k)
            a.sup_Zalpha[k][i] = std::abs(amp) * std::abs(first_comp[k]);
    }
    return a;
}

ModelSpec ModelSpec::plain(Geometry g, double beta) {
    ModelSpec m;
    m.alpha = AlphaSpec::zero(g);
    m.G = Mat(g.m, g.m);
    m.geom = std::move(g);
    m.beta = beta;
    return m;
}

void ModelSpec::validate() const {
    if (G.rows != geom.m || G.cols != geom.m)
        throw std::invalid_argument("coupling matrix must be m x m");
    if (static_cast<int>(alpha.funcs.size()) != geom.m ||
        static_cast<int>(alpha.sup_alpha.size()) != geom.m ||
        static_cast<int>(alpha.sup_Zalpha.size()) != geom.n)
        throw std::invalid_argument("alpha data sized inconsistently with the frame");
    for (const auto& f : alpha.funcs)
        if (!f.empty() && f.nvars() != geom.N)
            throw std::invalid_argument("alpha arity mismatch");
    if (!(beta >= 0.0)) throw std::invalid_argument("beta must be nonnegative");
}

} // namespace hypo
