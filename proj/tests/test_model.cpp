#include <doctest.h>

#include <cmath>
#include <vector>

#include "mfbsde/model.hpp"
#include "mfbsde/scenarios.hpp"

using namespace mfbsde;

TEST_CASE("hl_constant of the built-in loss families") {
    CHECK(hl_constant(LossSpec::linear_shift(0.3)) == 1.0);
    CHECK(hl_constant(LossSpec::sine_perturbed(0.5)) == doctest::Approx(3.0).epsilon(1e-15));
    LossSpec symmetric = LossSpec::linear_shift(0.0);
    symmetric.c_lip = symmetric.C_lip = 2.5;
    CHECK(hl_constant(symmetric) == 1.0);
    LossSpec broken = LossSpec::linear_shift(0.0);
    broken.c_lip = 0.0;
    CHECK_THROWS_AS(hl_constant(broken), ModelError);
    CHECK_THROWS_AS(LossSpec::sine_perturbed(1.0), ModelError);
}

TEST_CASE("loss evaluation and shift") {
    const LossSpec a = LossSpec::linear_shift(0.0, 0.3, 1.0);
    CHECK(a(0.5, 0.0) == doctest::Approx(-0.3));
    CHECK(a(0.0, 0.2) == doctest::Approx(0.2));
    const LossSpec s = LossSpec::sine_perturbed(0.5);
    CHECK(s(0.0, 1.0) == doctest::Approx(1.0 + 0.5 * std::sin(1.0)));
    CHECK(s(0.0, -0.7) == doctest::Approx(-s(0.0, 0.7)));
    for (double y = s.positivity_threshold(); y < s.positivity_threshold() + 20.0; y += 0.37)
        CHECK(s(0.3, y) > 0.0);
}

TEST_CASE("zero driver passes with zero Lipschitz ratios") {
    ScenarioSpec spec = scenario_a();
    const ValidationReport report = validate_assumptions(spec, 500, 7);
    CHECK(report.passed());
    REQUIRE(report.find("H_f") != nullptr);
    CHECK(report.find("H_f")->worst_ratio == 0.0);
    CHECK(report.probes == 500);
    CHECK(report.seed == 7);
}

TEST_CASE("running_sup resistance saturates its Lipschitz bound on constant paths") {
    ResistanceSpec g;
    g.kind = ResistanceKind::running_sup;
    const std::vector<double> y(11, 0.0), ybar(11, 0.5);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double gap = std::abs(g.at(y, i, 0.1) - g.at(ybar, i, 0.1));
        CHECK(gap / 0.5 == doctest::Approx(1.0));
    }
}

TEST_CASE("resistance families") {
    const std::vector<double> path{0.0, 1.0, -3.0, 2.0};
    ResistanceSpec g;
    g.kind = ResistanceKind::evaluation;
    CHECK(g.at(path, 2, 0.5) == -3.0);
    g.kind = ResistanceKind::running_sup;
    CHECK(g.at(path, 3, 0.5) == 3.0);
    g.kind = ResistanceKind::scaled_integral;
    g.horizon = 0.5;
    // left Riemann sum 0.5 * (0 + 1 - 3), divided by max(horizon, 1) = 1
    CHECK(g.at(path, 3, 0.5) == doctest::Approx(-1.0));
    g.horizon = 4.0;
    CHECK(g.at(path, 3, 0.5) == doctest::Approx(-0.25));
    g.kind = ResistanceKind::zero;
    CHECK(g.at(path, 3, 0.5) == 0.0);
}

TEST_CASE("sine_perturbed slope probe stays within [0.5, 1.5]") {
    ScenarioSpec spec = scenario_a();
    spec.loss = LossSpec::sine_perturbed(0.5);
    const ValidationReport report = validate_assumptions(spec, 4000, 11);
    CHECK(report.passed());
    // slope 1 + 0.5 cos(y) on a fine grid
    double lo = 2.0, hi = 0.0;
    for (double y = -10.0; y <= 10.0; y += 1e-4) {
        const double slope = 1.0 + 0.5 * std::cos(y);
        lo = std::min(lo, slope);
        hi = std::max(hi, slope);
    }
    CHECK(report.min_slope >= lo - 1e-6);
    CHECK(report.max_slope <= hi + 1e-6);
    CHECK(report.min_slope < 0.6);
    CHECK(report.max_slope > 1.4);
}

TEST_CASE("every built-in scenario passes the assumption probes") {
    for (const auto& s : registry()) {
        CAPTURE(s.name);
        const ValidationReport report = validate_assumptions(s.spec, 2000, 3);
        for (const auto& c : report.checks) {
            CAPTURE(c.name);
            CHECK(c.worst_ratio <= 1.0 + kAssumptionSlack);
        }
        CHECK(hl_constant(s.spec.loss) >= 1.0);
    }
}

TEST_CASE("an understated lambda is detected") {
    ScenarioSpec spec = scenario_b();
    spec.driver.lambda = 0.25;  // a = 0.5
    const ValidationReport report = validate_assumptions(spec, 500, 5);
    CHECK_FALSE(report.passed());
    CHECK(report.find("H_f")->worst_ratio > 1.5);
}

TEST_CASE("inconsistent mode flags are rejected") {
    ScenarioSpec spec = scenario_d();
    spec.driver.mode = GeneratorMode::lipschitz;
    CHECK_THROWS_AS(spec.check(), ModelError);
    CHECK_THROWS_AS(validate_assumptions(spec, 10, 1), ModelError);

    ScenarioSpec unbounded = scenario_d();
    unbounded.terminal = TerminalSpec{TerminalKind::affine, 1.0, 0.0};
    CHECK_THROWS_AS(unbounded.check(), ModelError);

    ScenarioSpec bad_dim = scenario_b();
    bad_dim.driver.b_z = {1.0, 2.0};
    CHECK_THROWS_AS(bad_dim.check(), ModelError);

    CHECK_THROWS_AS(validate_assumptions(scenario_a(), 0, 1), ModelError);
    CHECK_THROWS_AS(parse_mode("cubic"), ModelError);
    CHECK(parse_mode("quadratic") == GeneratorMode::quadratic);
}

TEST_CASE("validation is reproducible for a fixed seed") {
    const auto a = validate_assumptions(scenario_d(), 300, 42);
    const auto b = validate_assumptions(scenario_d(), 300, 42);
    REQUIRE(a.checks.size() == b.checks.size());
    for (std::size_t i = 0; i < a.checks.size(); ++i) CHECK(a.checks[i].worst_ratio == b.checks[i].worst_ratio);
}
