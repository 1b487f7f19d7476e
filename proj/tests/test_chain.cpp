#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "rilt/chain_counts.hpp"
#include "rilt/rng.hpp"

using namespace rilt;

namespace {
const IncrementLaw& law() {
    static IncrementLaw l = IncrementLaw::named("default");
    return l;
}
KernelTable& table() {
    static KernelTable t = [] {
        KernelTable k(law());
        k.build_disc(16);
        k.set_kappa(fit_kappa(k, 8, 15));
        return k;
    }();
    return t;
}
WalkPath fixture_path(std::vector<LatticePoint> pts) {
    WalkPath p;
    p.positions = std::move(pts);
    return p;
}
}  // namespace

TEST_CASE("hand-enumerated pair counts") {
    const auto p = fixture_path({{0, 0}, {1, 1}, {0, 0}, {1, 1}});
    CHECK(count_chains(p, ChainSpec(2, {{0, 0}})).total() == 2);  // (0,2),(1,3)
    CHECK(count_chains(p, ChainSpec(2, {{1, 1}})).total() == 3);  // (0,1),(0,3),(2,3)
    CHECK(count_chains(p, ChainSpec(2, {{5, 5}})).total() == 0);
}

TEST_CASE("chain spec validation") {
    CHECK_THROWS(ChainSpec(0, {}));
    CHECK_THROWS(ChainSpec(2, {}));
    CHECK_THROWS(ChainSpec(1, {{1, 0}}));
    const ChainSpec s(3, {{1, 0}, {0, 1}});
    CHECK(s.without({3}).offsets == std::vector<LatticePoint>{{1, 0}});
    CHECK(s.without({2}).offsets == std::vector<LatticePoint>{{0, 1}});
    CHECK(s.without({2, 3}).k == 1);
}

TEST_CASE("counts start at zero and increase monotonically") {
    const auto p = simulate(law(), 300, 3, 1);
    for (int k = 2; k <= 4; ++k) {
        std::vector<LatticePoint> offs(size_t(k) - 1, LatticePoint{0, 0});
        const auto c = count_chains(p, ChainSpec(k, offs));
        for (int64_t i = 0; i < k - 1; ++i) CHECK(c.running[size_t(i)] == 0);
        for (size_t i = 1; i < c.running.size(); ++i) {
            CHECK(c.running[i] >= c.running[i - 1]);
            CHECK(c.increments[i] >= 0);
            CHECK(c.running[i] - c.running[i - 1] == c.increments[i]);
        }
    }
}

TEST_CASE("dynamic program equals brute force enumeration") {
    RandomStream rs(2024, 0);
    for (int trial = 0; trial < 600; ++trial) {
        const int64_t n = 4 + int64_t(rs.next_u64() % 9);  // 4..12
        const int k = 1 + int(rs.next_u64() % 4);          // 1..4
        std::vector<LatticePoint> offs;
        for (int j = 0; j + 1 < k; ++j)
            offs.push_back({int(rs.next_u64() % 5) - 2, int(rs.next_u64() % 5) - 2});
        const auto p = simulate(law(), n, 99, uint64_t(trial));
        const ChainSpec spec(k, offs);
        const auto c = count_chains(p, spec);
        CHECK(c.total() == oracle::brute_chain_count(p, n, spec));
        // also per-prefix
        for (int64_t j = 0; j <= n; j += 3)
            CHECK(c.running[size_t(j)] == oracle::brute_chain_count(p, j, spec));
        CHECK(count_chains_total(p, spec) == c.total());
    }
}

TEST_CASE("k = 1 series is the time index") {
    const auto p = simulate(law(), 17, 4, 4);
    const auto c = count_chains(p, ChainSpec(1, {}));
    for (int64_t i = 0; i <= 17; ++i) CHECK(c.running[size_t(i)] == i);
}

TEST_CASE("renormalized series closed forms") {
    const int64_t n = 400;
    const auto p = simulate(law(), n, 5, 2);
    SUBCASE("k = 2 subtraction") {
        const LatticePoint x{1, 1};
        const auto c = count_chains(p, ChainSpec(2, {x}));
        const auto series = renormalize(p, ChainSpec(2, {x}), table(), n);
        const double gn = table().scaled(n, x);
        for (int64_t j = 0; j <= n; j += 37)
            CHECK(series.at(j) ==
                  doctest::Approx(double(c.running[size_t(j)]) - gn * double(j)).epsilon(1e-12));
    }
    SUBCASE("k = 3 explicit expansion") {
        const LatticePoint x2{1, 0}, x3{0, 1};
        const auto series = renormalize(p, ChainSpec(3, {x2, x3}), table(), n);
        const double g2 = table().scaled(n, x2), g3 = table().scaled(n, x3);
        const double b3 = double(count_chains_total(p, ChainSpec(3, {x2, x3})));
        const double b2_x3 = double(count_chains_total(p, ChainSpec(2, {x3})));
        const double b2_x2 = double(count_chains_total(p, ChainSpec(2, {x2})));
        const double expect = b3 - g2 * b2_x3 - g3 * b2_x2 + g2 * g3 * double(n);
        CHECK(series.final_value() == doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("power-set oracle, k up to 5") {
        RandomStream rs(7, 7);
        for (int k = 2; k <= 5; ++k) {
            std::vector<LatticePoint> offs;
            for (int j = 0; j + 1 < k; ++j)
                offs.push_back({int(rs.next_u64() % 3) - 1, int(rs.next_u64() % 3) - 1});
            const auto small = simulate(law(), 60, 8, uint64_t(k));
            const auto series = renormalize(small, ChainSpec(k, offs), table(), 60);
            for (int64_t j : {int64_t(0), int64_t(31), int64_t(60)})
                CHECK(series.at(j) ==
                      doctest::Approx(oracle::brute_renormalized(small, ChainSpec(k, offs),
                                                                 table(), 60, j))
                          .epsilon(1e-11));
        }
    }
}

TEST_CASE("missing sub-counter is reported with its offsets") {
    const auto p = simulate(law(), 20, 6, 6);
    const ChainSpec spec(3, {{1, 0}, {0, 1}});
    std::map<ChainSpec, ChainCounter> counters;
    counters.emplace(spec, count_chains(p, spec));
    counters.emplace(ChainSpec(1, {}), count_chains(p, ChainSpec(1, {})));
    counters.emplace(ChainSpec(2, {{1, 0}}), count_chains(p, ChainSpec(2, {{1, 0}})));
    // the (2, {(0,1)}) reduction is absent
    try {
        (void)renormalize(counters, spec, table(), 20);
        FAIL("expected a missing sub-counter error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("0,1") != std::string::npos);
    }
}

TEST_CASE("beta identities") {
    const int64_t n = 512;
    const auto p = simulate(law(), n, 11, 3);
    // beta_2(n, 0) = B_2(n,0)/n - G_n(0)
    const double beta = beta_k(p, ChainSpec(2, {{0, 0}}), table());
    const double b2 = double(count_chains_total(p, ChainSpec(2, {{0, 0}})));
    CHECK(beta == doctest::Approx(b2 / double(n) - table().scaled(n, {0, 0})).epsilon(1e-12));
    CHECK(beta_k(p, ChainSpec(1, {}), table()) == 1.0);
    // beta is only defined at m = n
    auto series = renormalize(p, ChainSpec(2, {{0, 0}}), table(), 100);
    CHECK_THROWS_AS((void)series.beta(n), std::domain_error);
    CHECK_THROWS_AS((void)series.beta(0), std::domain_error);
}

TEST_CASE("series CSV export") {
    const auto p = simulate(law(), 25, 13, 1);
    const ChainSpec spec(2, {{0, 0}});
    const auto c = count_chains(p, spec);
    const auto series = renormalize(p, spec, table(), 25);
    export_series_csv(c, series, "chain_series_test.csv");
    std::ifstream in("chain_series_test.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "i,B_k,B_tilde_k");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 26);
    std::filesystem::remove("chain_series_test.csv");
}
