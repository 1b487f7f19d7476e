#pragma once

// Test-only oracles, deliberately independent of the library's optimized
// paths: direct enumerations and quadratic-time sums.

#include <cmath>
#include <functional>
#include <vector>

#include "rilt/chain_counts.hpp"
#include "rilt/lattice.hpp"
#include "rilt/mollifier.hpp"
#include "rilt/potential_kernel.hpp"
#include "rilt/walk.hpp"

namespace rilt::oracle {

// B_k(upto, x) by enumerating every increasing time tuple
inline int64_t brute_chain_count(const WalkPath& p, int64_t upto, const ChainSpec& s) {
    if (s.k == 1) return upto;
    std::vector<int64_t> idx(size_t(s.k));
    int64_t count = 0;
    std::function<void(int, int64_t)> rec = [&](int level, int64_t start) {
        if (level == s.k) {
            ++count;
            return;
        }
        for (int64_t i = start; i <= upto; ++i) {
            if (level > 0) {
                const LatticePoint want = p.at(idx[size_t(level) - 1]) + s.offsets[size_t(level) - 1];
                if (!(p.at(i) == want)) continue;
            }
            idx[size_t(level)] = i;
            rec(level + 1, i + 1);
        }
    };
    rec(0, 0);
    return count;
}

// renormalization by an explicit power-set loop over bitmasks, written
// independently of label_subsets/without
inline double brute_renormalized(const WalkPath& p, const ChainSpec& s, const KernelTable& k,
                                 int64_t m, int64_t j) {
    const int bits = s.k - 1;
    double total = 0.0;
    for (int mask = 0; mask < (1 << bits); ++mask) {
        double coeff = 1.0;
        std::vector<LatticePoint> kept;
        for (int b = 0; b < bits; ++b) {
            if (mask & (1 << b))
                coeff *= -k.scaled(m, s.offsets[size_t(b)]);
            else
                kept.push_back(s.offsets[size_t(b)]);
        }
        total += coeff * double(brute_chain_count(p, j, ChainSpec(1 + int(kept.size()), kept)));
    }
    return total;
}

// (1/n^2) sum_{0<=i<j<=n} f_tau((X_j-X_i)/sqrt n) by the quadratic loop
inline double brute_pair_sum(const WalkPath& p, double tau, const Mollifier& moll) {
    const int64_t n = p.steps();
    const double sqrt_n = std::sqrt(double(n));
    KahanSum s;
    for (int64_t j = 0; j <= n; ++j)
        for (int64_t i = 0; i < j; ++i) {
            const LatticePoint d = p.at(j) - p.at(i);
            s.add(moll.f_tau(tau, d.norm() / sqrt_n));
        }
    return s.value() / (double(n) * double(n));
}

// walk chain sum T_3 by the cubic loop
inline double brute_walk_triple(const WalkPath& p, double tau, const Mollifier& moll) {
    const int64_t n = p.steps();
    const double sqrt_n = std::sqrt(double(n));
    KahanSum s;
    for (int64_t a = 0; a <= n; ++a)
        for (int64_t b = a + 1; b <= n; ++b) {
            const double f1 = moll.f_tau(tau, (p.at(b) - p.at(a)).norm() / sqrt_n);
            if (f1 == 0.0) continue;
            for (int64_t c = b + 1; c <= n; ++c)
                s.add(f1 * moll.f_tau(tau, (p.at(c) - p.at(b)).norm() / sqrt_n));
        }
    return s.value() / std::pow(double(n), 3.0);
}

// Brownian triple chain integral by the cubic loop
inline double brute_bm_triple(std::span<const Vec2> pts, double h, double tau,
                              const Mollifier& moll) {
    KahanSum s;
    for (size_t a = 0; a < pts.size(); ++a)
        for (size_t b = a + 1; b < pts.size(); ++b) {
            const double f1 = moll.f_tau(tau, (pts[b] - pts[a]).norm());
            if (f1 == 0.0) continue;
            for (size_t c = b + 1; c < pts.size(); ++c)
                s.add(f1 * moll.f_tau(tau, (pts[c] - pts[b]).norm()));
        }
    return s.value() * h * h * h;
}

}  // namespace rilt::oracle
