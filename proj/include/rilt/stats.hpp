#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rilt {

double mean_of(std::span<const double> v);
double variance_of(std::span<const double> v);  // unbiased
double median_of(std::vector<double> v);        // by value: sorts a copy
double rms_of(std::span<const double> v);
double quantile_of(std::vector<double> v, double q);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double ci_lo = 0.0;  // 95% bootstrap percentile interval
    double ci_hi = 0.0;
};

enum class SlopeStat { Median, Rms };

// OLS slope of log(stat over samples[i]) against xs[i] (xs already on log
// scale). Bootstrap resamples each cell independently with a fixed seed;
// cells whose statistic is nonpositive make the fit undefined and throw.
SlopeFit fit_slope_bootstrap(std::span<const double> xs,
                             const std::vector<std::vector<double>>& samples, SlopeStat stat,
                             int resamples, uint64_t seed);

// P(median(a*) > median(b*)) over paired bootstrap resamples; a and b must be
// the same length (paired by replica).
double bootstrap_median_exceeds(std::span<const double> a, std::span<const double> b,
                                int resamples, uint64_t seed);

double ols_slope(std::span<const double> xs, std::span<const double> ys);

}  // namespace rilt
