#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mfbsde/model.hpp"

namespace mfbsde {

/// Analytic E[Y_t] and K_t of a scenario.
struct ClosedForm {
    std::function<double(double)> mean_y;
    std::function<double(double)> k;
};

struct NamedScenario {
    std::string name;
    ScenarioSpec spec;
    std::optional<ClosedForm> closed_form;
    std::string notes;
};

/// f = 0, xi = B_T, l(t, y) = y - amplitude sin(pi t / T), G = 0.
ScenarioSpec scenario_a(double T = 1.0, double amplitude = 0.3);
/// f = a E[y], xi = B_T + 1, G = 0; lambda declared as a.
ScenarioSpec scenario_b(double a = 0.5, double T = 0.5, const LossSpec& loss = LossSpec::linear_shift(0.0));
/// f = a E[y] - b G_t(k), G = evaluation, xi = B_T + shift.
ScenarioSpec scenario_c(double a = 0.2, double b = 0.1, double T = 0.01,
                        const LossSpec& loss = LossSpec::linear_shift(0.0), double xi_shift = 1.0);
/// f = a y + (gamma/2) min(|z|^2, 1e3) + eta |E[z]|, xi = L tanh(B_T), l = y + 0.5, quadratic mode.
ScenarioSpec scenario_d(double T = 0.005);

/// Closed forms: scenario A and scenario B (linear loss).
ClosedForm closed_form_a(double T = 1.0, double amplitude = 0.3);
ClosedForm closed_form_b(double a = 0.5, double T = 0.5);

/// Built-in scenarios: A_sine_constraint, B_meanfield_linear, C_resistance_lipschitz, D_quadratic.
const std::vector<NamedScenario>& registry();

/// Throws ModelError for unknown names.
const NamedScenario& find_scenario(const std::string& name);

}  // namespace mfbsde
