#include "mfbsde/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mfbsde {

ScenarioSpec scenario_a(double T, double amplitude) {
    ScenarioSpec s;
    s.name = "A_sine_constraint";
    s.T = T;
    s.terminal = TerminalSpec{TerminalKind::affine, 1.0, 0.0};
    s.driver.lambda = 1.0;
    s.loss = LossSpec::linear_shift(0.0, amplitude, T);
    return s;
}

ScenarioSpec scenario_b(double a, double T, const LossSpec& loss) {
    ScenarioSpec s;
    s.name = "B_meanfield_linear";
    s.T = T;
    s.terminal = TerminalSpec{TerminalKind::affine, 1.0, 1.0};
    s.driver.lambda = a;
    s.driver.a_ybar = a;
    s.loss = loss;
    return s;
}

ScenarioSpec scenario_c(double a, double b, double T, const LossSpec& loss, double xi_shift) {
    ScenarioSpec s;
    s.name = "C_resistance_lipschitz";
    s.T = T;
    s.terminal = TerminalSpec{TerminalKind::affine, 1.0, xi_shift};
    s.driver.lambda = std::max(std::abs(a), std::abs(b));
    s.driver.a_ybar = a;
    s.driver.a_k = -b;
    s.resistance.kind = ResistanceKind::evaluation;
    s.resistance.horizon = T;
    s.loss = loss;
    return s;
}

ScenarioSpec scenario_d(double T) {
    ScenarioSpec s;
    s.name = "D_quadratic";
    s.T = T;
    s.terminal = TerminalSpec{TerminalKind::tanh, 0.1, 0.0};
    s.driver.kind = DriverKind::quadratic_capped;
    s.driver.mode = GeneratorMode::quadratic;
    s.driver.lambda = 0.05;
    s.driver.alpha = 0.0;
    s.driver.l_bound = 0.1;
    s.driver.a_y = 0.05;
    s.driver.gamma = 0.1;
    s.driver.z_cap = 1e3;
    s.driver.eta = 0.05;
    s.loss = LossSpec::linear_shift(-0.5);
    return s;
}

ClosedForm closed_form_a(double T, double amplitude) {
    ClosedForm cf;
    cf.mean_y = [T, amplitude](double t) {
        return t <= 0.5 * T ? amplitude : amplitude * std::sin(std::numbers::pi * t / T);
    };
    cf.k = [T, amplitude](double t) {
        return t <= 0.5 * T ? 0.0 : amplitude * (1.0 - std::sin(std::numbers::pi * t / T));
    };
    return cf;
}

ClosedForm closed_form_b(double a, double T) {
    ClosedForm cf;
    cf.mean_y = [a, T](double t) { return std::exp(a * (T - t)); };
    cf.k = [](double) { return 0.0; };
    return cf;
}

const std::vector<NamedScenario>& registry() {
    static const std::vector<NamedScenario> scenarios = [] {
        std::vector<NamedScenario> r;
        r.push_back({"A_sine_constraint", scenario_a(), closed_form_a(),
                     "K_t = 0.3 (1 - sin(pi t / T))^+ on [T/2, T]; E[Y_t] = sup_{s >= t} 0.3 sin(pi s / T)"});
        r.push_back({"B_meanfield_linear", scenario_b(), closed_form_b(),
                     "E[Y_t] = exp(a (T - t)); constraint slack, K = 0"});
        r.push_back({"C_resistance_lipschitz", scenario_c(), std::nullopt, "referenced against the path-tree oracle"});
        r.push_back({"D_quadratic", scenario_d(), std::nullopt,
                     "quadratic mode, bounded terminal value; referenced against the path-tree oracle"});
        return r;
    }();
    return scenarios;
}

const NamedScenario& find_scenario(const std::string& name) {
    for (const auto& s : registry())
        if (s.name == name) return s;
    throw ModelError("scenarios: unknown scenario '" + name + "'");
}

}  // namespace mfbsde
