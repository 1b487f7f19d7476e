#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rilt/martingale.hpp"
#include "rilt/rng.hpp"
#include "rilt/stats.hpp"

using namespace rilt;

namespace {
const IncrementLaw& law() {
    static IncrementLaw l = IncrementLaw::named("default");
    return l;
}
KernelTable& table() {
    static KernelTable t = [] {
        KernelTable k(law());
        k.build_disc(40);
        k.set_kappa(fit_kappa(k, 22, 37));
        k.fit_far_field();
        return k;
    }();
    return t;
}
KernelAccess exact_access() { return {&table(), true, {0, 0}, 0.0}; }
}  // namespace

TEST_CASE("corrector endpoints") {
    const auto p = simulate(law(), 40, 3, 9);
    const LatticePoint x{2, 1};
    const auto u = corrector_u2(p, x, table());
    CHECK(u[0] == 0.0);
    CHECK(u[1] == doctest::Approx(table().scaled(40, p.at(1) - x)).epsilon(1e-12));
    const auto s = martingale_series_k2(p, x, exact_access());
    CHECK(s.M[0] == 0.0);
}

TEST_CASE("one-step conditional expectation vanishes, k = 2") {
    const auto ka = exact_access();
    RandomStream rs(31, 1);
    double worst = 0.0;
    for (int r = 0; r < 30; ++r) {
        const int64_t len = 5 + int64_t(rs.next_u64() % 116);
        const auto prefix = simulate(law(), len, 41, uint64_t(r));
        worst = std::max(worst, exact_onestep_residual(prefix, ChainSpec(2, {{1, 1}}), len, ka));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("one-step conditional expectation vanishes, k = 3 and 4, any horizon") {
    const auto ka = exact_access();
    double worst = 0.0;
    for (int r = 0; r < 12; ++r) {
        const auto p3 = simulate(law(), 30 + 4 * r, 43, uint64_t(r));
        worst = std::max(worst,
                         exact_onestep_residual(p3, ChainSpec(3, {{1, 0}, {0, 1}}), p3.steps(), ka));
        worst = std::max(worst,
                         exact_onestep_residual(p3, ChainSpec(3, {{0, 0}, {0, 0}}), 777, ka));
    }
    for (int r = 0; r < 4; ++r) {
        const auto p4 = simulate(law(), 24 + 3 * r, 47, uint64_t(r));
        worst = std::max(
            worst, exact_onestep_residual(p4, ChainSpec(4, {{1, 0}, {0, 1}, {-1, 0}}), 64, ka));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("fault injection: a perturbed kernel site is detected") {
    const auto p = simulate(law(), 80, 53, 2);
    const LatticePoint x{1, 1};
    // perturb a site of the form X_{n-1} - X_i - x that the check visits
    const LatticePoint site = p.at(p.steps() - 1) - p.at(0) - x;
    KernelAccess bad{&table(), true, site, 0.01};
    const double res = exact_onestep_residual(p, ChainSpec(2, {x}), p.steps(), bad);
    CHECK(res >= 1e-4);
    KernelAccess good{&table(), true, {0, 0}, 0.0};
    CHECK(exact_onestep_residual(p, ChainSpec(2, {x}), p.steps(), good) < 1e-10);
}

TEST_CASE("k = 2 reduction of the general corrector differs by the documented terms") {
    const int64_t n = 120, m = 64;
    const auto p = simulate(law(), n, 59, 4);
    const LatticePoint x{1, 0};
    const auto uk = corrector_uk(p, ChainSpec(2, {x}), table(), m);
    // statement form of the k=2 corrector, at the same fixed m
    std::vector<double> u2m(size_t(n) + 1, 0.0);
    for (int64_t j = 0; j <= n; ++j) {
        KahanSum s;
        for (int64_t i = 0; i < j; ++i)
            s.add(table().at(p.at(j) - p.at(i) - x) - table().scaled_shift(m));
        u2m[size_t(j)] = s.value();
    }
    // uk sums i = 1..j, u2 sums i = 0..j-1: difference is the i=j term minus
    // the i=0 term, G_m(-x) - G_m(X_j - x), and G is even
    for (int64_t j : {int64_t(1), int64_t(57), int64_t(120)}) {
        const double expect = (table().at(x) - table().scaled_shift(m)) -
                              (table().at(p.at(j) - x) - table().scaled_shift(m));
        CHECK(uk[size_t(j)] - u2m[size_t(j)] == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("general corrector needs the reduced series") {
    const auto p = simulate(law(), 30, 61, 5);
    CHECK_THROWS(martingale_series_k(p, ChainSpec(2, {{1, 0}}), 30, exact_access()));
}

TEST_CASE("martingale sample mean is centered, small scale") {
    const int R = 3000;
    const int64_t n = 64;
    const KernelAccess ka{&table(), false, {0, 0}, 0.0};
    std::vector<double> vals;
    vals.reserve(R);
    for (int r = 0; r < R; ++r) {
        const auto p = simulate(law(), n, 67, uint64_t(r));
        vals.push_back(martingale_final_k2(p, {1, 1}, ka));
    }
    const double m = mean_of(vals);
    const double se = std::sqrt(variance_of(vals) / double(R));
    CHECK(std::abs(m) < 3.0 * se);
}

TEST_CASE("k = 3 martingale sample mean is centered, small scale") {
    const int R = 1500;
    const int64_t n = 64;
    const KernelAccess ka{&table(), false, {0, 0}, 0.0};
    std::vector<double> vals;
    vals.reserve(R);
    for (int r = 0; r < R; ++r) {
        const auto p = simulate(law(), n, 71, uint64_t(r));
        vals.push_back(martingale_final_k(p, ChainSpec(3, {{1, 0}, {0, 1}}), n, ka));
    }
    const double m = mean_of(vals);
    const double se = std::sqrt(variance_of(vals) / double(R));
    CHECK(std::abs(m) < 3.0 * se);
}
