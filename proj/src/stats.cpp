#include "hypocoerce/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hypo {

double MomentStats::mean() const { return n == 0 ? 0.0 : sum / static_cast<double>(n); }

double MomentStats::variance() const {
    if (n < 2) return 0.0;
    double m = mean();
    double v = (sum_sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
    return std::max(v, 0.0);
}

double MomentStats::std_err() const {
    if (n < 2) return 0.0;
    return std::sqrt(variance() / static_cast<double>(n));
}

LineFit fit_line(std::span<const double> x, std::span<const double> y,
                 std::span<const double> weight) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("line fit needs >= 2 matched points");
    bool weighted = !weight.empty();
    if (weighted && weight.size() != x.size())
        throw std::invalid_argument("weight length mismatch");

    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        double w = weighted ? weight[i] : 1.0;
        sw += w;
        swx += w * x[i];
        swy += w * y[i];
        swxx += w * x[i] * x[i];
        swxy += w * x[i] * y[i];
    }
    double det = sw * swxx - swx * swx;
    if (det <= 0) throw std::invalid_argument("degenerate abscissae in line fit");

    LineFit f;
    f.n = x.size();
    f.slope = (sw * swxy - swx * swy) / det;
    f.intercept = (swxx * swy - swx * swxy) / det;

    if (weighted) {
        // weights are 1/sigma^2: parameter covariance straight from the
        // normal equations
        f.slope_se = std::sqrt(sw / det);
        f.intercept_se = std::sqrt(swxx / det);
    } else {
        double rss = 0;
        for (size_t i = 0; i < x.size(); ++i) {
            double r = y[i] - f.intercept - f.slope * x[i];
            rss += r * r;
        }
        double dof = static_cast<double>(x.size()) - 2.0;
        double s2 = dof > 0 ? rss / dof : 0.0;
        f.slope_se = std::sqrt(s2 * sw / det);
        f.intercept_se = std::sqrt(s2 * swxx / det);
    }
    return f;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
    size_t n = v.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // average rank of the tie block
        for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

} // namespace

double spearman_rho(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("rank correlation needs >= 2 matched points");
    std::vector<double> rx = ranks(x), ry = ranks(y);
    double mx = 0, my = 0;
    for (size_t i = 0; i < rx.size(); ++i) { mx += rx[i]; my += ry[i]; }
    mx /= static_cast<double>(rx.size());
    my /= static_cast<double>(ry.size());
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < rx.size(); ++i) {
        double a = rx[i] - mx, b = ry[i] - my;
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if (sxx == 0 || syy == 0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

SquaredMean squared_mean(double mean, double se) {
    return {mean * mean - se * se, 2.0 * std::abs(mean) * se};
}

} // namespace hypo
