#include "rilt/martingale.hpp"

#include <stdexcept>

namespace rilt {

namespace {

// B-tilde_{k,m} series with the G_m(x_i) coefficients routed through the same
// accessor as every other kernel value, so perturbations hit them too.
std::vector<double> renorm_series_ka(const WalkPath& path, const ChainSpec& spec, int64_t m,
                                     const KernelAccess& ka) {
    const double shift = ka.table->scaled_shift(m);
    std::map<ChainSpec, ChainCounter> counters;
    for (const auto& dropped : label_subsets(spec.k)) {
        ChainSpec sub = spec.without(dropped);
        if (!counters.count(sub)) counters.emplace(sub, count_chains(path, sub));
    }
    const size_t len = size_t(path.steps()) + 1;
    std::vector<double> out(len, 0.0);
    for (const auto& dropped : label_subsets(spec.k)) {
        double coeff = (dropped.size() % 2 == 0) ? 1.0 : -1.0;
        for (int label : dropped) coeff *= ka.g(spec.offsets[size_t(label - 2)]) - shift;
        const auto& running = counters.at(spec.without(dropped)).running;
        for (size_t j = 0; j < len; ++j) out[j] += coeff * double(running[j]);
    }
    return out;
}

}  // namespace

MartingaleSeries martingale_series_k2(const WalkPath& path, LatticePoint x,
                                      const KernelAccess& ka) {
    const int64_t n = path.steps();
    MartingaleSeries s;
    s.k = 2;
    s.m = n;
    s.exact_g = ka.exact;
    s.U.resize(size_t(n) + 1);
    s.M.resize(size_t(n) + 1);
    const double gx = ka.g(x);
    const double shift = n >= 1 ? ka.table->scaled_shift(n) : 0.0;
    SiteCountMap occupancy(size_t(n) + 1);
    int64_t b2 = 0;
    for (int64_t j = 0; j <= n; ++j) {
        const LatticePoint pj = path.at(j);
        if (j > 0) b2 += occupancy.get(pj - x);
        occupancy.add(pj, 1);
        KahanSum u;
        for (int64_t i = 0; i < j; ++i) u.add(ka.g(pj - path.at(i) - x));
        s.U[size_t(j)] = u.value() - double(j) * shift;
        s.M[size_t(j)] = u.value() + double(b2) - double(j) * gx;
    }
    return s;
}

double martingale_final_k2(const WalkPath& path, LatticePoint x, const KernelAccess& ka) {
    const int64_t n = path.steps();
    const LatticePoint pn = path.at(n);
    SiteCountMap occupancy(size_t(n) + 1);
    int64_t b2 = 0;
    KahanSum u;
    for (int64_t i = 0; i <= n; ++i) {
        const LatticePoint pi = path.at(i);
        if (i > 0) b2 += occupancy.get(pi - x);
        occupancy.add(pi, 1);
        if (i < n) u.add(ka.g(pn - pi - x));
    }
    return u.value() + double(b2) - double(n) * ka.g(x);
}

namespace {

// The i >= 1 corrector sum alone leaves a one-step defect
// -G_m(x_2)...G_m(x_{k-1}) p(1,0,X_{n-1}-x_k): its k=2-type reduction runs
// over i = 1..n where the exact k=2 corrector runs over 0..n-1. Extending the
// increment convention to B-tilde_{1,m}(-1) = -1 adds the i = 0 term
// (-1)^k (prod_{l<k} G_m(x_l)) G_m(X_j - x_k), whose compensator cancels the
// defect exactly; the constant G_m(-x_k) part is subtracted so M_0 = 0.
double boundary_coeff(const ChainSpec& spec, int64_t m, const KernelAccess& ka) {
    const double shift = ka.table->scaled_shift(m);
    double c = (spec.k % 2 == 0) ? 1.0 : -1.0;
    for (size_t l = 0; l + 1 < spec.offsets.size(); ++l)
        c *= ka.g(spec.offsets[l]) - shift;
    return c;
}

}  // namespace

MartingaleSeries martingale_series_k(const WalkPath& path, const ChainSpec& spec, int64_t m,
                                     const KernelAccess& ka) {
    if (spec.k < 3)
        throw std::invalid_argument("martingale_series_k: use the k=2 form for k < 3");
    const int64_t n = path.steps();
    MartingaleSeries s;
    s.k = spec.k;
    s.m = m;
    s.exact_g = ka.exact;
    const double shift = ka.table->scaled_shift(m);
    const LatticePoint xk = spec.offsets.back();
    const ChainSpec reduced = spec.without({spec.k});
    const std::vector<double> prev = renorm_series_ka(path, reduced, m, ka);
    const std::vector<double> full = renorm_series_ka(path, spec, m, ka);
    const double bc = boundary_coeff(spec, m, ka);
    const double g_at_origin = ka.g(-xk) - shift;
    s.U.resize(size_t(n) + 1);
    s.M.resize(size_t(n) + 1);
    for (int64_t j = 0; j <= n; ++j) {
        KahanSum u;
        for (int64_t i = 1; i <= j; ++i) {
            const double dprev = prev[size_t(i)] - prev[size_t(i) - 1];
            if (dprev == 0.0) continue;
            u.add((ka.g(path.at(j) - path.at(i) - xk) - shift) * dprev);
        }
        u.add(bc * ((ka.g(path.at(j) - xk) - shift) - g_at_origin));
        s.U[size_t(j)] = u.value();
        s.M[size_t(j)] = u.value() + full[size_t(j)];
    }
    return s;
}

double martingale_final_k(const WalkPath& path, const ChainSpec& spec, int64_t m,
                          const KernelAccess& ka) {
    if (spec.k < 3)
        throw std::invalid_argument("martingale_final_k: use the k=2 form for k < 3");
    const int64_t n = path.steps();
    const double shift = ka.table->scaled_shift(m);
    const LatticePoint xk = spec.offsets.back();
    const std::vector<double> prev = renorm_series_ka(path, spec.without({spec.k}), m, ka);
    const std::vector<double> full = renorm_series_ka(path, spec, m, ka);
    KahanSum u;
    const LatticePoint pn = path.at(n);
    for (int64_t i = 1; i <= n; ++i) {
        const double dprev = prev[size_t(i)] - prev[size_t(i) - 1];
        if (dprev == 0.0) continue;
        u.add((ka.g(pn - path.at(i) - xk) - shift) * dprev);
    }
    const double bc = boundary_coeff(spec, m, ka);
    u.add(bc * ((ka.g(pn - xk) - shift) - (ka.g(-xk) - shift)));
    return u.value() + full[size_t(n)];
}

std::vector<double> corrector_u2(const WalkPath& path, LatticePoint x, const KernelTable& kernel,
                                 bool exact) {
    KernelAccess ka{&kernel, exact, {0, 0}, 0.0};
    return martingale_series_k2(path, x, ka).U;
}

std::vector<double> corrector_uk(const WalkPath& path, const ChainSpec& spec,
                                 const KernelTable& kernel, int64_t m, bool exact) {
    KernelAccess ka{&kernel, exact, {0, 0}, 0.0};
    if (spec.k == 2) {
        // reduction with B-tilde_{1,m}(i) = i: sum_{i=1}^{j} G_m(X_j - X_i - x2)
        const int64_t n = path.steps();
        std::vector<double> out(size_t(n) + 1, 0.0);
        const double shift = kernel.scaled_shift(m);
        for (int64_t j = 0; j <= n; ++j) {
            KahanSum u;
            for (int64_t i = 1; i <= j; ++i)
                u.add(ka.g(path.at(j) - path.at(i) - spec.offsets[0]) - shift);
            out[size_t(j)] = u.value();
        }
        return out;
    }
    return martingale_series_k(path, spec, m, ka).U;
}

double exact_onestep_residual(const WalkPath& prefix, const ChainSpec& spec, int64_t m,
                              const KernelAccess& ka) {
    const int64_t n = prefix.steps();
    if (n < 1) throw std::invalid_argument("exact_onestep_residual: need n >= 1");
    const IncrementLaw law = ka.table->law();

    WalkPath base = prefix;
    base.positions.resize(size_t(n));  // drop the last step: length n-1 path
    auto value = [&](const WalkPath& p) {
        return spec.k == 2 ? martingale_final_k2(p, spec.offsets[0], ka)
                           : martingale_final_k(p, spec, m, ka);
    };
    const double m_prev = value(base);

    WalkPath extended = base;
    extended.positions.push_back({0, 0});
    const LatticePoint last = base.positions.back();
    KahanSum expect;
    for (const auto& atom : law.atoms()) {
        extended.positions.back() = last + atom.step;
        expect.add(atom.prob.to_double() * value(extended));
    }
    return std::abs(expect.value() - m_prev);
}

}  // namespace rilt
