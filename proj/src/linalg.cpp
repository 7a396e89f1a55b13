#include "hypocoerce/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hypo {

Mat Mat::identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Mat operator+(const Mat& x, const Mat& y) {
    if (x.rows != y.rows || x.cols != y.cols) throw std::invalid_argument("matrix shape mismatch");
    Mat r = x;
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] += y.a[i];
    return r;
}

Mat operator*(const Mat& x, const Mat& y) {
    if (x.cols != y.rows) throw std::invalid_argument("matrix shape mismatch");
    Mat r(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int k = 0; k < x.cols; ++k) {
            double v = x(i, k);
            if (v == 0.0) continue;
            for (int j = 0; j < y.cols; ++j) r(i, j) += v * y(k, j);
        }
    return r;
}

Mat transpose(const Mat& x) {
    Mat r(x.cols, x.rows);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.cols; ++j) r(j, i) = x(i, j);
    return r;
}

Mat sym_part(const Mat& x) {
    Mat r(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.cols; ++j) r(i, j) = 0.5 * (x(i, j) + x(j, i));
    return r;
}

Mat asym_part(const Mat& x) {
    Mat r(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.cols; ++j) r(i, j) = 0.5 * (x(i, j) - x(j, i));
    return r;
}

double frobenius(const Mat& x) {
    double s = 0;
    for (double v : x.a) s += v * v;
    return std::sqrt(s);
}

SymEig sym_eig(const Mat& a0) {
    if (a0.rows != a0.cols) throw std::invalid_argument("symmetric eig needs a square matrix");
    int n = a0.rows;
    Mat a = sym_part(a0);
    Mat v = Mat::identity(n);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double apq = a(p, q);
                if (std::abs(apq) < 1e-300) continue;
                double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) < a(j, j); });

    SymEig out;
    out.values.resize(n);
    out.vectors = Mat(n, n);
    for (int j = 0; j < n; ++j) {
        out.values[j] = a(order[j], order[j]);
        for (int i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }

    Mat as = sym_part(a0);
    double res = 0;
    for (int j = 0; j < n; ++j) {
        double norm2 = 0;
        for (int i = 0; i < n; ++i) {
            double r = -out.values[j] * out.vectors(i, j);
            for (int k = 0; k < n; ++k) r += as(i, k) * out.vectors(k, j);
            norm2 += r * r;
        }
        res = std::max(res, std::sqrt(norm2));
    }
    out.residual = res;
    return out;
}

Mat sqrt_spd(const Mat& a) {
    SymEig e = sym_eig(a);
    for (double lam : e.values)
        if (lam <= 0.0) throw std::domain_error("matrix square root requires positive definiteness");
    int n = a.rows;
    Mat r(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0;
            for (int k = 0; k < n; ++k)
                s += e.vectors(i, k) * std::sqrt(e.values[k]) * e.vectors(j, k);
            r(i, j) = s;
        }
    return r;
}

void mat_vec(const Mat& m, std::span<const double> x, std::span<double> out) {
    for (int i = 0; i < m.rows; ++i) {
        double s = 0;
        for (int j = 0; j < m.cols; ++j) s += m(i, j) * x[j];
        out[i] = s;
    }
}

} // namespace hypo
