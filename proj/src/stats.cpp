#include "rilt/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rilt/rng.hpp"

namespace rilt {

double mean_of(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean_of: empty");
    double s = 0.0;
    for (double x : v) s += x;
    return s / double(v.size());
}

double variance_of(std::span<const double> v) {
    if (v.size() < 2) throw std::invalid_argument("variance_of: need >= 2 samples");
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / double(v.size() - 1);
}

double median_of(std::vector<double> v) { return quantile_of(std::move(v), 0.5); }

double rms_of(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("rms_of: empty");
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / double(v.size()));
}

double quantile_of(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("quantile_of: empty");
    std::sort(v.begin(), v.end());
    const double pos = q * double(v.size() - 1);
    const size_t lo = size_t(std::floor(pos));
    const size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - double(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

double ols_slope(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("ols_slope: bad inputs");
    const double mx = mean_of(xs), my = mean_of(ys);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        num += (xs[i] - mx) * (ys[i] - my);
        den += (xs[i] - mx) * (xs[i] - mx);
    }
    return num / den;
}

namespace {
double stat_of(const std::vector<double>& v, SlopeStat stat) {
    return stat == SlopeStat::Median ? median_of(v) : rms_of(v);
}
}  // namespace

SlopeFit fit_slope_bootstrap(std::span<const double> xs,
                             const std::vector<std::vector<double>>& samples, SlopeStat stat,
                             int resamples, uint64_t seed) {
    if (xs.size() != samples.size() || xs.size() < 2)
        throw std::invalid_argument("fit_slope_bootstrap: bad inputs");
    std::vector<double> ys(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) {
        const double s = stat_of(samples[i], stat);
        if (!(s > 0.0))
            throw std::runtime_error("fit_slope_bootstrap: nonpositive statistic, log undefined");
        ys[i] = std::log(s);
    }
    SlopeFit fit;
    fit.slope = ols_slope(xs, ys);
    const double mx = mean_of(xs);
    fit.intercept = mean_of(ys) - fit.slope * mx;

    RandomStream rs(seed, 0xb007);
    std::vector<double> slopes;
    slopes.reserve(size_t(resamples));
    std::vector<double> cell;
    for (int b = 0; b < resamples; ++b) {
        std::vector<double> yb(xs.size());
        bool ok = true;
        for (size_t i = 0; i < xs.size() && ok; ++i) {
            const auto& src = samples[i];
            cell.resize(src.size());
            for (size_t j = 0; j < src.size(); ++j)
                cell[j] = src[rs.next_u64() % src.size()];
            const double s = stat_of(cell, stat);
            if (!(s > 0.0))
                ok = false;
            else
                yb[i] = std::log(s);
        }
        if (ok) slopes.push_back(ols_slope(xs, yb));
    }
    if (slopes.size() < size_t(resamples) / 2)
        throw std::runtime_error("fit_slope_bootstrap: too many degenerate resamples");
    fit.ci_lo = quantile_of(slopes, 0.025);
    fit.ci_hi = quantile_of(slopes, 0.975);
    return fit;
}

double bootstrap_median_exceeds(std::span<const double> a, std::span<const double> b,
                                int resamples, uint64_t seed) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("bootstrap_median_exceeds: bad inputs");
    RandomStream rs(seed, 0xb008);
    int wins = 0;
    std::vector<double> ra(a.size()), rb(b.size());
    for (int r = 0; r < resamples; ++r) {
        for (size_t j = 0; j < a.size(); ++j) {
            const size_t idx = size_t(rs.next_u64() % a.size());
            ra[j] = a[idx];
            rb[j] = b[idx];
        }
        if (median_of(ra) > median_of(rb)) ++wins;
    }
    return double(wins) / double(resamples);
}

}  // namespace rilt
