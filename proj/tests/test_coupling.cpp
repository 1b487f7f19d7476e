#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "rilt/coupling.hpp"
#include "rilt/mollifier.hpp"
#include "rilt/stats.hpp"

using namespace rilt;

namespace {
const IncrementLaw& law() {
    static IncrementLaw l = IncrementLaw::named("default");
    return l;
}
const Mollifier& moll() {
    static Mollifier m;
    return m;
}
}  // namespace

TEST_CASE("mollifier normalization, support and scaling") {
    // independent check of the integral: Riemann sum on a fine lattice
    const double h = 1.0 / 400.0;
    KahanSum s, sl;
    for (int i = -420; i <= 420; ++i)
        for (int j = -420; j <= 420; ++j) {
            const double r = std::hypot(i * h, j * h);
            const double f = moll().f_tau(1.0, r);
            s.add(f * h * h);
            if (f > 0.0) sl.add(f * std::log(1.0 / r) * h * h / std::numbers::pi_v<double>);
        }
    CHECK(s.value() == doctest::Approx(1.0).epsilon(2e-5));
    CHECK(sl.value() == doctest::Approx(moll().l_f()).epsilon(2e-4));
    // support annulus
    for (double tau : {1.0, 0.2, 0.05}) {
        CHECK(moll().f_tau(tau, 0.49 * tau) == 0.0);
        CHECK(moll().f_tau(tau, 1.01 * tau) == 0.0);
        CHECK(moll().f_tau(tau, 0.75 * tau) > 0.0);
    }
    // l(f_tau) = l(f) + log(1/tau)/pi
    CHECK(moll().l_f_tau(0.1) ==
          doctest::Approx(moll().l_f() + std::log(10.0) / std::numbers::pi_v<double>)
              .epsilon(1e-14));
    CHECK_THROWS(moll().l_f_tau(0.0));
}

TEST_CASE("coupling demands a product law and a power-of-two grid") {
    CHECK_THROWS_WITH_AS(couple(IncrementLaw::named("srw"), 10, 0x1p-8, 1, 1),
                         doctest::Contains("product-form"), std::invalid_argument);
    CHECK_THROWS(couple(law(), 10, 0.011, 1, 1));
    CHECK_THROWS(couple(law(), 10, 0.5, 1, 1));
}

TEST_CASE("embedded walk has exactly the product law") {
    // chi-square on per-coordinate increments of one long coupled path
    const auto cp = couple(law(), 300000, 0x1p-6, 2024, 1);
    std::map<int, int64_t> freq;
    for (int64_t i = 1; i <= cp.walk.steps(); ++i) {
        freq[cp.walk.at(i).x - cp.walk.at(i - 1).x]++;
        freq[cp.walk.at(i).y - cp.walk.at(i - 1).y]++;
    }
    const double N = 2.0 * 300000;
    const double expect[5] = {1.0 / 32, 3.0 / 8, 3.0 / 16, 3.0 / 8, 1.0 / 32};
    double chi2 = 0.0;
    for (int d = -2; d <= 2; ++d) {
        const double e = expect[d + 2] * N;
        const double o = double(freq[d]);
        chi2 += (o - e) * (o - e) / e;
    }
    CHECK(chi2 < 30.0);  // 4 dof
    // x and y increments are uncorrelated
    double sxy = 0.0;
    for (int64_t i = 1; i <= cp.walk.steps(); ++i) {
        const LatticePoint d = cp.walk.at(i) - cp.walk.at(i - 1);
        sxy += double(d.x) * double(d.y);
    }
    CHECK(std::abs(sxy / 300000.0) < 0.02);
}

TEST_CASE("embedding clocks average one unit per step") {
    double ratio = 0.0;
    const int R = 6;
    for (int r = 0; r < R; ++r) {
        const auto cp = couple(law(), 20000, 0x1p-8, 7, uint64_t(r));
        ratio += (cp.clock_x.back() + cp.clock_y.back()) / (2.0 * 20000.0);
    }
    ratio /= R;
    CHECK(std::abs(ratio - 1.0) < 0.02);
}

TEST_CASE("deterministic replay and trivial path") {
    const auto a = couple(law(), 500, 0x1p-8, 5, 9);
    const auto b = couple(law(), 500, 0x1p-8, 5, 9);
    CHECK(a.walk.positions == b.walk.positions);
    CHECK(a.bm_x == b.bm_x);
    const auto zero = couple(law(), 0, 0x1p-8, 5, 9);
    CHECK(sup_scaled_distance(zero) == 0.0);
}

TEST_CASE("coupling distance shrinks with n") {
    std::vector<double> med;
    for (int64_t n : {int64_t(256), int64_t(8192)}) {
        std::vector<double> sups;
        for (int r = 0; r < 5; ++r)
            sups.push_back(sup_scaled_distance(couple(law(), n, 0x1p-8, 31, uint64_t(r))));
        med.push_back(median_of(sups));
    }
    CHECK(med[1] < med[0]);
}

TEST_CASE("rescaled view geometry") {
    const auto cp = couple(law(), 1024, 0x1p-8, 3, 3);
    const int64_t stride = stride_for(cp, 1024, 0.001);
    const double h = double(stride) * cp.delta_grid / 1024.0;
    CHECK(h <= 0.001);
    CHECK(h * 2.0 > 0.001);  // largest admissible stride
    const auto pts = rescaled_bm(cp, stride);
    CHECK(pts[0].x == 0.0);
    CHECK(pts.size() == size_t(std::floor(1.0 / h)) + 1);
    const size_t g = size_t(stride) * 3;
    CHECK(pts[3].x == doctest::Approx(cp.bm_x[g] / 32.0).epsilon(1e-15));
    CHECK_THROWS(rescaled_bm(cp, 0));
}

TEST_CASE("mollified estimator: dynamic program equals the direct pair sum") {
    const auto cp = couple(law(), 1024, 0x1p-8, 11, 3);
    const int64_t stride = stride_for(cp, 1024, 0.0005);
    const auto pts = rescaled_bm(cp, stride);
    const double h = double(stride) * cp.delta_grid / 1024.0;
    REQUIRE(pts.size() < 2100);
    for (double tau : {0.2, 0.3}) {
        const auto est = mollified_gamma(pts, h, tau, 2, moll());
        const double direct = mollified_double_integral_direct(pts, h, tau, moll());
        CHECK(est.components[0] == doctest::Approx(direct).epsilon(1e-12));
        CHECK(est.value == doctest::Approx(direct - moll().l_f_tau(tau)).epsilon(1e-12));
    }
}

TEST_CASE("mollified estimator on a straight-line fixture") {
    // line moving one full tau per grid step: no pair ever lands inside the
    // annulus, so the double integral vanishes and only -l(f_tau) remains
    const double tau = 0.1;
    const double h = tau * tau / 64.0;  // exactly at the resolution guard
    const double speed = tau / h;
    std::vector<Vec2> pts;
    for (int i = 0; i * h <= 1.0; ++i) pts.push_back({speed * i * h, 0.0});
    const auto est2 = mollified_gamma(pts, h, tau, 2, moll());
    CHECK(est2.components[0] == 0.0);
    CHECK(est2.value == doctest::Approx(-moll().l_f_tau(tau)).epsilon(1e-14));
    // j = k-1 component is +/- l^{k-1} * 1
    const auto est3 = mollified_gamma(pts, h, tau, 3, moll());
    const double l = moll().l_f_tau(tau);
    CHECK(est3.components[2] == doctest::Approx(l * l).epsilon(1e-14));
    CHECK_THROWS(mollified_gamma(pts, 4.0 * h, tau, 2, moll()));  // grid too coarse
}

TEST_CASE("triple chain integral matches the cubic brute force") {
    const auto cp = couple(law(), 256, 0x1p-8, 13, 5);
    const int64_t stride = stride_for(cp, 256, 0.003);
    const auto pts = rescaled_bm(cp, stride);
    const double h = double(stride) * cp.delta_grid / 256.0;
    REQUIRE(pts.size() < 400);
    const double tau = 0.45;
    const auto T = chain_integrals(pts, h, tau, 3, moll());
    CHECK(T[3] == doctest::Approx(oracle::brute_bm_triple(pts, h, tau, moll())).epsilon(1e-11));
}

TEST_CASE("brownian grid dump") {
    const auto cp = couple(law(), 64, 0x1p-8, 17, 1);
    dump_bm(cp, "bm_dump_test.bin");
    CHECK(std::filesystem::file_size("bm_dump_test.bin") == cp.bm_x.size() * 16);
    std::filesystem::remove("bm_dump_test.bin");
}
