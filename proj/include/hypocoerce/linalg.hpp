// Dense linear algebra for the small (<= 8x8) matrices appearing in the
// coupling matrix G: symmetric eigendecomposition by cyclic Jacobi rotations
// and the SPD principal square root.
#pragma once

#include <span>
#include <vector>

namespace hypo {

struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
    static Mat identity(int n);

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
};

Mat operator+(const Mat& x, const Mat& y);
Mat operator*(const Mat& x, const Mat& y);
Mat transpose(const Mat& x);
Mat sym_part(const Mat& x);   // (X + X^T)/2
Mat asym_part(const Mat& x);  // (X - X^T)/2
double frobenius(const Mat& x);

struct SymEig {
    std::vector<double> values;  // ascending
    Mat vectors;                 // columns are eigenvectors
    double residual;             // max_i |A v_i - lambda_i v_i|_2
};

SymEig sym_eig(const Mat& a);

// Principal square root of a symmetric positive definite matrix; throws
// std::domain_error when an eigenvalue is <= 0.
Mat sqrt_spd(const Mat& a);

void mat_vec(const Mat& m, std::span<const double> x, std::span<double> out);

} // namespace hypo
