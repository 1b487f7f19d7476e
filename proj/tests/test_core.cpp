#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <numbers>

#include "rilt/increment_law.hpp"
#include "rilt/rng.hpp"
#include "rilt/stats.hpp"
#include "rilt/transition_grid.hpp"
#include "rilt/walk.hpp"

using namespace rilt;

TEST_CASE("rational arithmetic stays exact") {
    Rational a(1, 3), b(1, 6);
    CHECK(a + b == Rational(1, 2));
    CHECK(a * b == Rational(1, 18));
    CHECK(a - b == Rational(1, 6));
    CHECK((Rational(2, 4) == Rational(1, 2)));
    CHECK(Rational(-3, -6) == Rational(1, 2));
    CHECK(Rational(3, -6).num == -1);
    CHECK_THROWS(Rational(1, 0));
}

TEST_CASE("philox known-answer vectors") {
    // Random123 reference outputs for philox4x32-10
    auto b0 = Philox4x32::generate(0, 0, 0);
    CHECK(b0.v[0] == 0x6627e8d5u);
    CHECK(b0.v[1] == 0xe169c58du);
    CHECK(b0.v[2] == 0xbc57ac4cu);
    CHECK(b0.v[3] == 0x9b00dbd8u);
    auto b1 = Philox4x32::generate(~0ull, ~0ull, ~0ull);
    CHECK(b1.v[0] == 0x408f276du);
    CHECK(b1.v[1] == 0x41c83b0eu);
    CHECK(b1.v[2] == 0xa20bc7c6u);
    CHECK(b1.v[3] == 0x6d5451fdu);
    auto b2 = Philox4x32::generate(0x299f31d0a4093822ull, 0x0370734413198a2eull,
                                   0x85a308d3243f6a88ull);
    CHECK(b2.v[0] == 0xd16cfe09u);
    CHECK(b2.v[1] == 0x94fdccebu);
    CHECK(b2.v[2] == 0x5001e420u);
    CHECK(b2.v[3] == 0x24126ea1u);
}

TEST_CASE("random stream determinism and stream separation") {
    RandomStream a(42, 7), b(42, 7), c(42, 8);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    int differs = 0;
    RandomStream a2(42, 7);
    for (int i = 0; i < 100; ++i)
        if (a2.next_u64() != c.next_u64()) ++differs;
    CHECK(differs > 90);
    RandomStream n(1, 2);
    double mean = 0.0, var = 0.0;
    const int N = 200000;
    for (int i = 0; i < N; ++i) {
        const double z = n.normal();
        mean += z;
        var += z * z;
    }
    mean /= N;
    var = var / N - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("alias table reproduces the default law (chi-square)") {
    const auto law = IncrementLaw::named("default");
    std::vector<double> probs;
    for (const auto& a : law.atoms()) probs.push_back(a.prob.to_double());
    AliasTable alias(probs);
    RandomStream rs(5, 5);
    const int N = 1000000;
    std::vector<int64_t> counts(probs.size(), 0);
    for (int i = 0; i < N; ++i) counts[alias.sample(rs)]++;
    double chi2 = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        const double e = probs[i] * N;
        chi2 += (counts[i] - e) * (counts[i] - e) / e;
    }
    // 24 dof, 0.999 quantile ~ 51.2; generous but fails hard on sampler bugs
    CHECK(chi2 < 60.0);
}

TEST_CASE("default law satisfies every walk hypothesis") {
    const auto law = IncrementLaw::named("default");
    CHECK(law.atoms().size() == 25);
    const auto rep = validate(law, 256);
    CHECK(rep.mean_zero());
    CHECK(rep.identity_covariance());
    CHECK(rep.symmetric);
    CHECK(rep.generates_lattice);
    CHECK(rep.aperiodicity_margin > 0.0);
    CHECK(rep.paper_compliant());
    // the exclusion ball has radius 2*pi/256, so the margin scale is
    // (2*pi/256)^2/2; measured 3.01e-4
    CHECK(rep.aperiodicity_margin > 2e-4);
    CHECK(rep.aperiodicity_margin < 6e-4);
}

TEST_CASE("characteristic function spot values") {
    const auto def = IncrementLaw::named("default");
    CHECK(def.characteristic_function(0.0, 0.0) == doctest::Approx(1.0).epsilon(1e-14));
    const double pi = std::numbers::pi_v<double>;
    // per-coordinate factor at pi is 3/16 - 3/4 + 1/16 = -1/2, so phi = 1/4
    CHECK(def.characteristic_function(pi, pi) == doctest::Approx(0.25).epsilon(1e-12));
    const auto srw = IncrementLaw::named("srw");
    CHECK(srw.characteristic_function(pi, pi) == doctest::Approx(-1.0).epsilon(1e-12));
    const auto diag = IncrementLaw::named("diagonal");
    CHECK(diag.characteristic_function(pi, pi) == doctest::Approx(1.0).epsilon(1e-12));
    // non-symmetric law refused
    IncrementLaw skew("skew", {{{1, 0}, {1, 2}}, {{-1, 0}, {1, 4}}, {{0, 1}, {1, 4}}});
    CHECK_THROWS_AS((void)skew.characteristic_function(0.1, 0.2), std::domain_error);
}

TEST_CASE("negative-control laws fail exactly as expected") {
    const auto srw = validate(IncrementLaw::named("srw"), 256);
    CHECK(srw.covariance[0] == Rational(1, 2));
    CHECK(srw.aperiodicity_margin == 0.0);
    CHECK(!srw.paper_compliant());
    const auto diag = validate(IncrementLaw::named("diagonal"), 256);
    CHECK(diag.identity_covariance());
    CHECK(diag.aperiodicity_margin == 0.0);
    CHECK(!diag.generates_lattice);
    const auto king = validate(IncrementLaw::named("king"), 256);
    CHECK(king.covariance[0] == Rational(3, 4));
    CHECK(king.aperiodicity_margin > 0.0);
    CHECK(!king.paper_compliant());
}

TEST_CASE("law construction enforces exact total probability") {
    CHECK_THROWS(IncrementLaw("bad", {{{1, 0}, {1, 2}}, {{-1, 0}, {1, 3}}}));
    CHECK_THROWS(IncrementLaw("dup", {{{1, 0}, {1, 2}}, {{1, 0}, {1, 2}}}));
    CHECK_THROWS(validate(IncrementLaw::named("default"), 32));  // resolution too low
}

TEST_CASE("law JSON file round trip") {
    const char* path = "law_roundtrip_test.json";
    {
        std::FILE* f = std::fopen(path, "w");
        std::fputs(
            "[{\"dx\":1,\"dy\":0,\"num\":1,\"den\":4},{\"dx\":-1,\"dy\":0,\"num\":1,\"den\":4},"
            "{\"dx\":0,\"dy\":1,\"num\":1,\"den\":4},{\"dx\":0,\"dy\":-1,\"num\":1,\"den\":4}]",
            f);
        std::fclose(f);
    }
    const auto law = IncrementLaw::resolve(path);
    CHECK(law.hash() == IncrementLaw::named("srw").hash());
    std::filesystem::remove(path);
    CHECK_THROWS(IncrementLaw::from_json_file("does_not_exist.json"));
}

TEST_CASE("walk simulation basics") {
    const auto law = IncrementLaw::named("default");
    const auto empty = simulate(law, 0, 1, 2);
    CHECK(empty.positions.size() == 1);
    CHECK(empty.at(0) == LatticePoint{0, 0});

    const auto a = simulate(law, 5000, 9, 3);
    const auto b = simulate(law, 5000, 9, 3);
    CHECK(a.positions == b.positions);
    const auto c = simulate(law, 5000, 9, 4);
    CHECK(a.positions != c.positions);
    for (int64_t i = 1; i <= a.steps(); ++i)
        CHECK(!law.prob_of(a.at(i) - a.at(i - 1)).is_zero());
}

TEST_CASE("million-step empirical increment variance within CLT band") {
    const auto law = IncrementLaw::named("default");
    const int64_t n = 1000000;
    const auto path = simulate(law, n, 123, 0);
    double sx = 0, sxx = 0, sy = 0, syy = 0;
    for (int64_t i = 1; i <= n; ++i) {
        const LatticePoint d = path.at(i) - path.at(i - 1);
        sx += d.x;
        sxx += double(d.x) * d.x;
        sy += d.y;
        syy += double(d.y) * d.y;
    }
    const double vx = sxx / n - (sx / n) * (sx / n);
    const double vy = syy / n - (sy / n) * (sy / n);
    const double tol = 3.0 * std::sqrt(2.0 / double(n));
    CHECK(std::abs(vx - 1.0) < tol);
    CHECK(std::abs(vy - 1.0) < tol);
}

TEST_CASE("scaled endpoint mean over replicas") {
    const auto law = IncrementLaw::named("default");
    const int R = 400;
    double mx = 0, my = 0;
    for (int r = 0; r < R; ++r) {
        const auto p = simulate(law, 1024, 77, uint64_t(r));
        const Vec2 v = scaled_position(p, 1.0);
        mx += v.x;
        my += v.y;
    }
    CHECK(std::abs(mx / R) < 4.0 / std::sqrt(double(R)));
    CHECK(std::abs(my / R) < 4.0 / std::sqrt(double(R)));
}

TEST_CASE("scaled position definition") {
    const auto law = IncrementLaw::named("default");
    auto p = simulate(law, 4, 3, 3);
    p.positions = {{0, 0}, {1, 0}, {2, 0}, {2, 1}, {2, 2}};
    CHECK(scaled_position(p, 0.0).x == 0.0);
    CHECK(scaled_position(p, 0.5).x == doctest::Approx(1.0));  // X_2/sqrt(4) = (2,0)/2
    CHECK(scaled_position(p, 0.5).y == doctest::Approx(0.0));
    CHECK(scaled_position(p, 1.0).y == doctest::Approx(1.0));
    CHECK_THROWS_AS((void)scaled_position(p, 1.5), std::domain_error);
    CHECK_THROWS_AS((void)scaled_position(p, -0.1), std::domain_error);
}

TEST_CASE("path dump round trip") {
    const auto law = IncrementLaw::named("default");
    const auto p = simulate(law, 257, 5, 6);
    dump_path(p, "path_dump_test.bin");
    const auto back = load_path_dump("path_dump_test.bin");
    CHECK(back == p.positions);
    std::filesystem::remove("path_dump_test.bin");
}

TEST_CASE("transition grid slices") {
    const auto law = IncrementLaw::named("default");
    TransitionGrid grid(law, 24);
    // slice 1 is the law table
    for (const auto& a : law.atoms())
        CHECK(grid.p(1, a.step) == doctest::Approx(a.prob.to_double()).epsilon(1e-15));
    for (int n = 1; n <= 24; ++n) CHECK(std::abs(grid.slice_sum(n) - 1.0) < 1e-12);
    // symmetry
    for (int n : {3, 7, 20})
        for (const LatticePoint x : {LatticePoint{3, 1}, LatticePoint{-2, 5}, LatticePoint{0, 4}})
            CHECK(grid.p(n, x) == doctest::Approx(grid.p(n, -x)).epsilon(1e-14));
    // p(2,0,0) = (sum_a q(a)^2)^2 = (326/1024)^2
    const double expected = (326.0 / 1024.0) * (326.0 / 1024.0);
    CHECK(grid.p(2, {0, 0}) == doctest::Approx(expected).epsilon(1e-14));
    // product fast path matches the 2D convolution
    const auto p0 = TransitionGrid::return_probabilities(law, 24);
    for (int n = 1; n <= 24; ++n)
        CHECK(p0[size_t(n)] == doctest::Approx(grid.p(n, {0, 0})).epsilon(1e-13));
    CHECK_THROWS(TransitionGrid(law, 3000));  // box guard
}

TEST_CASE("stats helpers") {
    std::vector<double> v = {3.0, 1.0, 2.0};
    CHECK(median_of(v) == doctest::Approx(2.0));
    CHECK(mean_of(v) == doctest::Approx(2.0));
    CHECK(quantile_of(v, 0.0) == doctest::Approx(1.0));
    CHECK(quantile_of(v, 1.0) == doctest::Approx(3.0));
    std::vector<double> xs = {0.0, 1.0, 2.0}, ys = {1.0, 3.0, 5.0};
    CHECK(ols_slope(xs, ys) == doctest::Approx(2.0));
    // bootstrap slope on clean decaying data
    std::vector<std::vector<double>> cells;
    for (int i = 0; i < 4; ++i) {
        std::vector<double> cell;
        for (int r = 0; r < 50; ++r) cell.push_back(std::exp(-0.5 * i) * (1.0 + 0.01 * (r % 7)));
        cells.push_back(cell);
    }
    std::vector<double> lx = {0.0, 1.0, 2.0, 3.0};
    const auto fit = fit_slope_bootstrap(lx, cells, SlopeStat::Median, 400, 9);
    CHECK(fit.slope == doctest::Approx(-0.5).epsilon(0.02));
    CHECK(fit.ci_hi < -0.45);
}
