#pragma once

#include <cstddef>
#include <vector>

#include "mfbsde/constants.hpp"
#include "mfbsde/picard.hpp"

namespace mfbsde {

/// Partition of [0, T] into sub-intervals that each fit the contraction horizon.
struct IntervalPlan {
    GeneratorMode mode = GeneratorMode::lipschitz;
    double delta_star = 0.0;  ///< applicable horizon (delta or delta_hat)
    double a_tilde = 0.0;     ///< quadratic per-interval ball radius, built from l_bar
    double bound_L = 0.0;     ///< quadratic: l_bar, the L used per interval
    ConstantsReport constants;
    /// Grid nodes n = s_0 > s_1 > ... > s_m = 0.
    std::vector<std::size_t> breakpoints;

    std::size_t intervals() const { return breakpoints.empty() ? 0 : breakpoints.size() - 1; }
    /// Nodes of interval j = 1..m, counted from the terminal end.
    StepRange interval(std::size_t j) const { return {breakpoints[j], breakpoints[j - 1]}; }
};

/// Equal-length sub-intervals of at most delta_star, snapped to grid nodes.
/// `forced_intervals` > 0 requests that many (each still within delta_star).
IntervalPlan plan_intervals(const ScenarioSpec& scenario, const TimeGrid& grid, std::size_t forced_intervals = 0);

struct GlobalSolution {
    ReflectedSolution solution;
    IntervalPlan plan;
    std::vector<PicardHistory> histories;  ///< one per interval, terminal end first
    std::vector<double> interval_flatness;
    std::vector<double> interval_eps_flat;
    std::vector<double> seam_constraint;  ///< E[l(s_j, Y_{s_j})] at interior breakpoints
    std::vector<double> seam_k_jump;      ///< |K from the left - K from the right| at interior breakpoints
    std::vector<double> seam_y_jump;      ///< max |Y from the left - Y from the right| at interior breakpoints
};

/// Backward interval-by-interval solve. Each earlier interval takes the pasted Y
/// at its right endpoint as terminal value; K offsets keep K continuous.
GlobalSolution solve_global(const ScenarioSpec& scenario, const CondExpBackend& backend, const IntervalPlan& plan,
                            const PicardOptions& options = {});

struct UniformBoundReport {
    bool applicable = false;  ///< quadratic mode with a declared bound on f(t, y, ybar, 0, zbar)
    double l_bar = 0.0;
    double y_sinf = 0.0;
    std::vector<double> interval_y_sinf;
    bool passed = true;
};

/// Compares max |Y| with `bound` overall and on each interval between `breakpoints`
/// (global node indices, terminal end first).
UniformBoundReport uniform_bound_check(const ScenarioSpec& scenario, const ReflectedSolution& solution, double bound,
                                       const std::vector<std::size_t>& breakpoints = {});
/// Uses the plan's l_bar (quadratic) or l_bar(C, L, lambda, T).
UniformBoundReport uniform_bound_check(const ScenarioSpec& scenario, const GlobalSolution& global);

}  // namespace mfbsde
