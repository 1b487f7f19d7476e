#include "rilt/transition_grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rilt {

TransitionGrid::TransitionGrid(const IncrementLaw& law, int horizon)
    : law_(law), horizon_(horizon) {
    if (horizon < 1) throw std::invalid_argument("TransitionGrid: horizon must be >= 1");
    const int64_t side = 2LL * horizon * law.max_jump() + 1;
    if (side * side > 4096LL * 4096LL)
        throw std::runtime_error(
            "TransitionGrid: box " + std::to_string(side) + "^2 exceeds the 4096^2 guard (" +
            std::to_string(side * side * 8 / (1 << 20)) + " MiB per slice)");
    slices_.resize(size_t(horizon) + 1);
    // slice 0 is the point mass at the origin
    slices_[0] = {1.0};
    for (int n = 1; n <= horizon; ++n) {
        const int r = radius_of(n), rp = radius_of(n - 1);
        const int w = 2 * r + 1, wp = 2 * rp + 1;
        std::vector<double> cur(size_t(w) * w, 0.0);
        const std::vector<double>& prev = slices_[size_t(n) - 1];
        for (int px = -rp; px <= rp; ++px)
            for (int py = -rp; py <= rp; ++py) {
                const double v = prev[size_t(px + rp) * wp + size_t(py + rp)];
                if (v == 0.0) continue;
                for (const auto& a : law.atoms())
                    cur[size_t(px + a.step.x + r) * w + size_t(py + a.step.y + r)] +=
                        v * a.prob.to_double();
            }
        slices_[size_t(n)] = std::move(cur);
    }
}

double TransitionGrid::p(int n, LatticePoint x) const {
    if (n < 0 || n > horizon_) throw std::out_of_range("TransitionGrid::p: n out of range");
    const int r = radius_of(n);
    if (std::abs(x.x) > r || std::abs(x.y) > r) return 0.0;
    const int w = 2 * r + 1;
    return slices_[size_t(n)][size_t(x.x + r) * w + size_t(x.y + r)];
}

double TransitionGrid::slice_sum(int n) const {
    if (n < 0 || n > horizon_) throw std::out_of_range("TransitionGrid::slice_sum");
    KahanSum s;
    for (double v : slices_[size_t(n)]) s.add(v);
    return s.value();
}

std::vector<std::vector<double>> convolve_1d(
    const std::vector<std::pair<int32_t, Rational>>& factor, int n_max) {
    int jump = 0;
    for (const auto& [d, p] : factor) jump = std::max(jump, std::abs(d));
    std::vector<std::vector<double>> slices(size_t(n_max) + 1);
    slices[0] = {1.0};  // offset range [0,0]
    for (int n = 1; n <= n_max; ++n) {
        const int r = n * jump, rp = (n - 1) * jump;
        std::vector<double> cur(size_t(2 * r + 1), 0.0);
        const auto& prev = slices[size_t(n) - 1];
        for (int o = -rp; o <= rp; ++o) {
            const double v = prev[size_t(o + rp)];
            if (v == 0.0) continue;
            for (const auto& [d, p] : factor) cur[size_t(o + d + r)] += v * p.to_double();
        }
        slices[size_t(n)] = std::move(cur);
    }
    return slices;
}

std::vector<double> TransitionGrid::return_probabilities(const IncrementLaw& law, int n_max) {
    std::vector<double> out(size_t(n_max) + 1, 0.0);
    out[0] = 1.0;
    if (law.one_d_factor()) {
        auto slices = convolve_1d(*law.one_d_factor(), n_max);
        int jump = 0;
        for (const auto& [d, p] : *law.one_d_factor()) jump = std::max(jump, std::abs(d));
        for (int n = 1; n <= n_max; ++n) {
            const double p0 = slices[size_t(n)][size_t(n * jump)];
            out[size_t(n)] = p0 * p0;
        }
        return out;
    }
    TransitionGrid grid(law, n_max);
    for (int n = 1; n <= n_max; ++n) out[size_t(n)] = grid.p(n, {0, 0});
    return out;
}

std::vector<double> time_sum_kernel_references(const IncrementLaw& law,
                                               const std::vector<LatticePoint>& xs, int n_max) {
    if (n_max < 16) throw std::invalid_argument("time_sum_kernel_reference: n_max too small");
    const size_t m = xs.size();
    std::vector<KahanSum> sums(m);
    std::vector<double> d_half(m, 0.0), d_full(m, 0.0);  // summand near n/2 and n
    const int n_half = n_max / 2;

    auto accumulate = [&](int n, auto&& p_of) {
        for (size_t i = 0; i < m; ++i) {
            const double d_n = p_of(xs[i]) - p_of(LatticePoint{1, 0});
            sums[i].add(d_n);
            if (n >= n_half - 1 && n <= n_half + 1) d_half[i] += d_n / 3.0;
            if (n >= n_max - 2) d_full[i] += d_n / 3.0;
        }
    };

    if (law.one_d_factor()) {
        const auto& factor = *law.one_d_factor();
        int jump = 0;
        for (const auto& [d, p] : factor) jump = std::max(jump, std::abs(d));
        // stream the 1D slices; p(n,0,(a,b)) = p1(n,a) * p1(n,b)
        std::vector<double> prev = {1.0};
        for (int n = 1; n <= n_max; ++n) {
            const int r = n * jump, rp = (n - 1) * jump;
            std::vector<double> cur(size_t(2 * r + 1), 0.0);
            for (int o = -rp; o <= rp; ++o) {
                const double v = prev[size_t(o + rp)];
                if (v == 0.0) continue;
                for (const auto& [d, p] : factor) cur[size_t(o + d + r)] += v * p.to_double();
            }
            prev = std::move(cur);
            accumulate(n, [&](LatticePoint x) {
                auto p1 = [&](int a) { return std::abs(a) > r ? 0.0 : prev[size_t(a + r)]; };
                return p1(x.x) * p1(x.y);
            });
        }
    } else {
        TransitionGrid grid(law, n_max);
        for (int n = 1; n <= n_max; ++n)
            accumulate(n, [&](LatticePoint x) { return grid.p(n, x); });
    }

    // Tail: model d_n = A/n^2 + B/n^3 from the two checkpoints, then sum the
    // model over n > n_max with Euler-Maclaurin partial sums.
    std::vector<double> out(m);
    const double m1 = double(n_half), m2 = double(n_max - 1);
    const double a11 = 1.0 / (m1 * m1), a12 = 1.0 / (m1 * m1 * m1);
    const double a21 = 1.0 / (m2 * m2), a22 = 1.0 / (m2 * m2 * m2);
    const double det = a11 * a22 - a12 * a21;
    const double N = double(n_max);
    const double s2 = 1.0 / N - 1.0 / (2.0 * N * N) + 1.0 / (6.0 * N * N * N);
    const double s3 = 1.0 / (2.0 * N * N) - 1.0 / (2.0 * N * N * N);
    for (size_t i = 0; i < m; ++i) {
        double A = 0.0, B = 0.0;
        if (det != 0.0) {
            A = (d_half[i] * a22 - d_full[i] * a12) / det;
            B = (a11 * d_full[i] - a21 * d_half[i]) / det;
        }
        out[i] = sums[i].value() + A * s2 + B * s3;
    }
    return out;
}

double time_sum_kernel_reference(const IncrementLaw& law, LatticePoint x, int n_max) {
    return time_sum_kernel_references(law, {x}, n_max)[0];
}

}  // namespace rilt
