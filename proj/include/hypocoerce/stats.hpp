// Statistics helpers for the Monte Carlo checks: moment accumulators,
// (weighted) least-squares lines with slope confidence intervals, and
// Spearman rank correlation.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hypo {

struct MomentStats {
    size_t n = 0;
    double sum = 0, sum_sq = 0;

    double mean() const;
    double variance() const;   // unbiased
    double std_err() const;    // of the mean
};

// Fit y = a + b x; weights are 1/sigma_i^2 when given.  slope_se is the
// standard error of b; the 95% band is b +- 1.96 slope_se.
struct LineFit {
    double intercept = 0, slope = 0;
    double slope_se = 0, intercept_se = 0;
    size_t n = 0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y,
                 std::span<const double> weight = {});

double spearman_rho(std::span<const double> x, std::span<const double> y);

// Bias-corrected estimate of mu^2 from (mean, se): mean^2 - se^2, with the
// delta-method standard error 2 |mean| se.
struct SquaredMean {
    double value;
    double std_err;
};
SquaredMean squared_mean(double mean, double se);

} // namespace hypo
