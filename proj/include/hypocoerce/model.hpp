// A single-site model: catalog geometry, friction strength beta, coupling
// matrix G on the generators, and bounded first-order drift coefficients
// alpha_i with certified sup norms.
#pragma once

#include "hypocoerce/geometry.hpp"
#include "hypocoerce/linalg.hpp"
#include "hypocoerce/observable.hpp"

#include <vector>

namespace hypo {

struct AlphaSpec {
    std::vector<Observable> funcs;               // size m; empty tree = identically zero
    std::vector<double> sup_alpha;               // ||alpha_i||_inf
    std::vector<std::vector<double>> sup_Zalpha; // [k][i] = ||Z_k alpha_i||_inf

    bool is_zero() const;

    static AlphaSpec zero(const Geometry& g);
    // alpha_i(x) = a_i tanh(x_1).  Valid whenever every frame field has a
    // constant first component (true for the whole catalog), which makes
    // ||Z_k alpha_i||_inf = |a_i| |Z_k^(1)| exact.
    static AlphaSpec tanh_first(const Geometry& g, const std::vector<double>& amplitudes);
};

struct ModelSpec {
    Geometry geom;
    double beta = 1.0;
    Mat G;          // m x m, zero by default
    AlphaSpec alpha;

    static ModelSpec plain(Geometry g, double beta);
    void validate() const;
};

} // namespace hypo
