#include "mfbsde/stitch.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mfbsde {

IntervalPlan plan_intervals(const ScenarioSpec& scenario, const TimeGrid& grid, std::size_t forced_intervals) {
    scenario.check();
    if (scenario.resistance.kind != ResistanceKind::zero)
        throw ModelError("stitch: a global solve requires a generator independent of k; the resistance must be zero");

    IntervalPlan plan;
    plan.mode = scenario.mode();
    const double C = scenario.C();
    const double L = scenario.L();
    const double lambda = scenario.driver.lambda;
    const double alpha = scenario.driver.alpha;
    if (plan.mode == GeneratorMode::lipschitz) {
        plan.constants = compute_constants(C, L, lambda, alpha, grid.T);
        plan.delta_star = plan.constants.delta_lip;
    } else {
        const double lb = l_bar(C, L, lambda, grid.T).l_bar;
        plan.bound_L = lb;
        plan.a_tilde = a_tilde_0(C, lb, lambda);
        plan.constants = compute_constants(C, lb, lambda, alpha, grid.T, plan.a_tilde);
        plan.delta_star = plan.constants.delta_hat;
    }

    const auto steps_max = static_cast<std::size_t>(std::floor(plan.delta_star / grid.dt + 1e-9));
    if (steps_max == 0) {
        std::ostringstream os;
        os << "stitch: contraction horizon " << plan.delta_star << " is shorter than one grid step " << grid.dt
           << "; use a finer grid";
        throw ModelError(os.str());
    }
    std::size_t m = (grid.n + steps_max - 1) / steps_max;
    if (forced_intervals > 0) {
        if (forced_intervals > grid.n) throw ModelError("stitch: more intervals requested than grid steps");
        if ((grid.n + forced_intervals - 1) / forced_intervals > steps_max) {
            std::ostringstream os;
            os << "stitch: " << forced_intervals << " intervals leave one longer than the contraction horizon "
               << plan.delta_star;
            throw ModelError(os.str());
        }
        m = forced_intervals;
    }

    // Even split; the first `extra` intervals from the terminal end take one more step.
    const std::size_t base = grid.n / m, extra = grid.n % m;
    plan.breakpoints.push_back(grid.n);
    std::size_t node = grid.n;
    for (std::size_t j = 0; j < m; ++j) {
        node -= base + (j < extra ? 1 : 0);
        plan.breakpoints.push_back(node);
    }
    return plan;
}

GlobalSolution solve_global(const ScenarioSpec& scenario, const CondExpBackend& backend, const IntervalPlan& plan,
                            const PicardOptions& options) {
    const TimeGrid& grid = backend.grid();
    if (plan.breakpoints.size() < 2 || plan.breakpoints.front() != grid.n || plan.breakpoints.back() != 0)
        throw ModelError("stitch: plan does not cover the grid");

    PicardOptions opt = options;
    if (plan.mode == GeneratorMode::quadratic) {
        opt.a_tilde = plan.a_tilde;
        opt.bound_L = plan.bound_L;
    }

    GlobalSolution global;
    global.plan = plan;
    const std::size_t m = plan.intervals();
    std::vector<ReflectedSolution> parts;
    parts.reserve(m);
    Eigen::VectorXd terminal = terminal_values(scenario, backend);
    for (std::size_t j = 1; j <= m; ++j) {
        const StepRange range = plan.interval(j);
        try {
            PicardResult r = picard_solve(scenario, backend, range, terminal, opt);
            global.interval_flatness.push_back(r.solution.diag.flatness_right);
            global.interval_eps_flat.push_back(r.solution.diag.eps_flat);
            global.histories.push_back(std::move(r.history));
            terminal = r.solution.y.front();
            parts.push_back(std::move(r.solution));
        } catch (const PicardError& e) {
            std::ostringstream os;
            os << "stitch: interval " << j << " of " << m << " failed: " << e.what();
            throw PicardError(os.str(), e.history());
        }
    }

    // Paste on [s_j, s_{j-1}): parts[j-1] covers interval j, terminal end first.
    ReflectedSolution& out = global.solution;
    out.range = StepRange::whole(grid);
    out.y.resize(grid.n + 1);
    out.z.resize(grid.n);
    out.f.resize(grid.n);
    out.rho.assign(grid.n + 1, 0.0);
    out.k = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.n + 1));
    double offset = 0.0;
    std::vector<double> left_k(m + 1, 0.0);
    std::vector<Eigen::VectorXd> left_y(m + 1);
    for (std::size_t j = m; j >= 1; --j) {
        const ReflectedSolution& part = parts[j - 1];
        const StepRange range = part.range;
        for (std::size_t i = range.first; i <= range.last; ++i) {
            const std::size_t local = i - range.first;
            if (i < range.last || j == 1) {
                out.y[i] = part.y[local];
                out.rho[i] = part.rho[local];
            }
            if (i < range.last) {
                out.z[i] = part.z[local];
                out.f[i] = part.f[local];
            }
            out.k(static_cast<Eigen::Index>(i)) = offset + part.k(static_cast<Eigen::Index>(local));
        }
        offset += part.k(part.k.size() - 1);
        left_k[j] = offset;
        left_y[j] = part.y.back();
    }
    const double k_last = out.k(out.k.size() - 1);
    out.ybar.resize(grid.n + 1);
    for (std::size_t i = 0; i <= grid.n; ++i)
        out.ybar[i] = out.y[i].array() - (k_last - out.k(static_cast<Eigen::Index>(i)));
    out.x = out.ybar;
    compute_diagnostics(scenario, backend, out, options.loss_tol);

    for (std::size_t j = 1; j < m; ++j) {
        const std::size_t s = plan.breakpoints[j];
        global.seam_constraint.push_back(out.diag.constraint[s]);
        // interval j + 1 ends at s, interval j starts there
        global.seam_k_jump.push_back(std::abs(left_k[j + 1] - out.k(static_cast<Eigen::Index>(s))));
        global.seam_y_jump.push_back((left_y[j + 1] - out.y[s]).cwiseAbs().maxCoeff());
    }
    return global;
}

UniformBoundReport uniform_bound_check(const ScenarioSpec& scenario, const ReflectedSolution& solution, double bound,
                                       const std::vector<std::size_t>& breakpoints) {
    UniformBoundReport report;
    report.applicable = scenario.mode() == GeneratorMode::quadratic && scenario.bounded_at_zero_z;
    report.l_bar = bound;
    const std::size_t first = solution.range.first;
    for (const auto& v : solution.y) report.y_sinf = std::max(report.y_sinf, v.cwiseAbs().maxCoeff());
    for (std::size_t j = 1; j < breakpoints.size(); ++j) {
        double worst = 0.0;
        for (std::size_t i = breakpoints[j]; i <= breakpoints[j - 1]; ++i)
            worst = std::max(worst, solution.y[i - first].cwiseAbs().maxCoeff());
        report.interval_y_sinf.push_back(worst);
    }
    report.passed = !report.applicable || report.y_sinf <= report.l_bar;
    return report;
}

UniformBoundReport uniform_bound_check(const ScenarioSpec& scenario, const GlobalSolution& global) {
    const double bound = global.plan.mode == GeneratorMode::quadratic
                             ? global.plan.bound_L
                             : l_bar(scenario.C(), scenario.L(), scenario.driver.lambda, scenario.T).l_bar;
    return uniform_bound_check(scenario, global.solution, bound, global.plan.breakpoints);
}

}  // namespace mfbsde
