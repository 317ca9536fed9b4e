#include <doctest.h>

#include <cmath>

#include "mfbsde/oracle.hpp"
#include "mfbsde/scenarios.hpp"

using namespace mfbsde;

TEST_CASE("scenario A on two steps") {
    const LatticeSolution s = exact_solve(scenario_a(), 2);
    CHECK(std::abs(s.y[0][0] - 0.3) <= 1e-12);
    REQUIRE(s.k.size() == 3);
    CHECK(s.k[0] == 0.0);
    CHECK(s.k[1] == 0.0);
    CHECK(std::abs(s.k[2] - 0.3) <= 1e-12);
    CHECK(std::abs(s.flatness_right) <= 1e-12);
    REQUIRE(s.y[2].size() == 4);
}

TEST_CASE("slack constraint leaves K at zero") {
    ScenarioSpec spec = scenario_a();
    spec.loss = LossSpec::linear_shift(-0.5);
    const LatticeSolution s = exact_solve(spec, 4);
    for (double k : s.k) CHECK(k == 0.0);
    for (std::size_t i = 0; i <= 4; ++i) {
        // node m at step i: B = (2 popcount(m) - i) sqrt(dt)
        for (std::size_t m = 0; m < s.y[i].size(); ++m) {
            const double b = (2.0 * __builtin_popcountll(m) - double(i)) * std::sqrt(s.dt);
            CHECK(std::abs(s.y[i][m] - b) <= 1e-14);
        }
    }
}

TEST_CASE("scenario B on eight steps is within the Euler error") {
    const LatticeSolution s = exact_solve(scenario_b(), 8);
    CHECK(std::abs(s.mean_y[0] - std::exp(0.25)) <= 0.02);
    for (double k : s.k) CHECK(k == 0.0);
}

TEST_CASE("oracle invariants on every built-in scenario") {
    for (const auto& entry : registry()) {
        CAPTURE(entry.name);
        const LatticeSolution s = exact_solve(entry.spec, 8);
        CHECK(std::abs(s.flatness_right) <= 1e-12);
        CHECK(s.k[0] == 0.0);
        for (std::size_t i = 1; i < s.k.size(); ++i) CHECK(s.k[i] >= s.k[i - 1]);
        CHECK(s.distances.back() <= 1e-12);
        const LatticeSolution again = exact_solve(entry.spec, 8);
        CHECK(again.mean_y == s.mean_y);
    }
}

TEST_CASE("fully frozen oracle X equals Ybar") {
    OracleOptions opt;
    opt.slots = SlotPolicy::fully_frozen;
    const LatticeSolution s = exact_solve(scenario_c(), 6, opt);
    for (std::size_t i = 0; i <= 6; ++i)
        for (std::size_t m = 0; m < s.x[i].size(); ++m) CHECK(std::abs(s.x[i][m] - s.ybar[i][m]) <= 1e-12);
}

TEST_CASE("oracle preconditions") {
    CHECK_THROWS_AS(exact_solve(scenario_a(), 13), ModelError);
    CHECK_THROWS_AS(exact_solve(scenario_a(), 0), ModelError);
    ScenarioSpec two = scenario_a();
    two.d = 2;
    CHECK_THROWS_AS(exact_solve(two, 4), ModelError);
}

TEST_CASE("lattice engine and regression engine against the oracle") {
    MonteCarloSettings mc;
    const OracleComparison a = oracle_compare(scenario_a(), 8, mc);
    CHECK(a.lattice_mean_y <= 1e-10);
    CHECK(a.lattice_k <= 1e-10);
    CHECK(a.lattice_flatness <= 1e-10);
    CHECK(a.regression_k <= 1e-2);
}

TEST_CASE("regression error shrinks with the sample size") {
    MonteCarloSettings small, large;
    small.N = 4000;
    large.N = 16000;
    small.seed = large.seed = 3;
    small.antithetic = large.antithetic = false;
    // average over seeds to suppress the luck of a single draw
    double e_small = 0.0, e_large = 0.0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        small.seed = large.seed = seed;
        e_small += oracle_compare(scenario_a(), 8, small).regression_k;
        e_large += oracle_compare(scenario_a(), 8, large).regression_k;
    }
    CHECK(e_large < e_small);
    CHECK(e_large / e_small < 0.75);
}
