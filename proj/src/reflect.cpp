#include "mfbsde/reflect.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mfbsde/parallel.hpp"

namespace mfbsde {

namespace {

double max_abs(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

std::span<const double> row_span(const ZMatrix& z, Eigen::Index row) {
    return {z.data() + row * z.cols(), static_cast<std::size_t>(z.cols())};
}

std::span<const double> vec_span(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

/// Generator values for every state at one step.
Eigen::VectorXd evaluate_driver(const DriverSpec& f, double t, const Eigen::VectorXd& y, double mean_y,
                                const ZMatrix& z, const Eigen::VectorXd& mean_z, double resistance) {
    Eigen::VectorXd out(y.size());
    const auto zbar = vec_span(mean_z);
    for (Eigen::Index p = 0; p < y.size(); ++p) out(p) = f(t, y(p), mean_y, row_span(z, p), zbar, resistance);
    return out;
}

/// Sample standard error of the mean of `values` (0 on exact engines).
double standard_error(const CondExpBackend& backend, const Eigen::VectorXd& values) {
    if (backend.exact() || values.size() < 2) return 0.0;
    const double mean = tree_sum(vec_span(values)) / static_cast<double>(values.size());
    const Eigen::VectorXd sq = (values.array() - mean).square().matrix();
    const double var = tree_sum(vec_span(sq)) / static_cast<double>(values.size() - 1);
    return std::sqrt(var / static_cast<double>(values.size()));
}

}  // namespace

FrozenInputs FrozenInputs::zero(const CondExpBackend& backend, StepRange range) {
    FrozenInputs in;
    const std::size_t nodes = range.nodes();
    in.mean_y.assign(nodes, 0.0);
    in.mean_z.assign(nodes, Eigen::VectorXd::Zero(backend.dim()));
    in.resistance.assign(nodes, 0.0);
    in.y.reserve(nodes);
    in.z.reserve(nodes);
    for (std::size_t i = range.first; i <= range.last; ++i) {
        const auto s = static_cast<Eigen::Index>(backend.states(i));
        in.y.push_back(Eigen::VectorXd::Zero(s));
        in.z.push_back(ZMatrix::Zero(s, backend.dim()));
    }
    return in;
}

void FrozenInputs::check(StepRange range, SlotPolicy policy) const {
    const std::size_t nodes = range.nodes();
    if (mean_y.size() != nodes || mean_z.size() != nodes || resistance.size() != nodes)
        throw ModelError("reflect: frozen mean-field and resistance paths must cover every node of the range");
    if (policy != SlotPolicy::implicit_y && y.size() != nodes)
        throw ModelError("reflect: frozen pathwise y is required by the selected slot policy");
    if (policy == SlotPolicy::fully_frozen && z.size() + 1 < nodes)
        throw ModelError("reflect: frozen pathwise z is required when every slot is frozen");
}

Eigen::VectorXd terminal_values(const ScenarioSpec& scenario, const CondExpBackend& backend) {
    const std::size_t n = backend.grid().n;
    const Eigen::MatrixXd b = backend.brownian(n);
    Eigen::VectorXd xi(b.rows());
    std::vector<double> row(static_cast<std::size_t>(b.cols()));
    for (Eigen::Index p = 0; p < b.rows(); ++p) {
        for (Eigen::Index j = 0; j < b.cols(); ++j) row[static_cast<std::size_t>(j)] = b(p, j);
        xi(p) = scenario.terminal(row);
    }
    return xi;
}

DeflatedSolution solve_deflated(const ScenarioSpec& scenario, const CondExpBackend& backend, StepRange range,
                                const Eigen::VectorXd& terminal, const FrozenInputs& frozen, SlotPolicy policy,
                                const ReflectOptions& options) {
    const TimeGrid& grid = backend.grid();
    if (range.last <= range.first || range.last > grid.n) throw ModelError("reflect: invalid step range");
    if (terminal.size() != static_cast<Eigen::Index>(backend.states(range.last)))
        throw ModelError("reflect: terminal values do not match the states at the last node");
    frozen.check(range, policy);

    const DriverSpec& f = scenario.driver;
    const double dt = grid.dt;
    const bool implicit = policy == SlotPolicy::implicit_y;
    const bool iterate = implicit && f.depends_on_y();
    if (iterate && f.lambda * dt >= 1.0) {
        std::ostringstream os;
        os << "reflect: implicit step needs lambda * dt < 1 (lambda = " << f.lambda << ", dt = " << dt
           << "); use a finer grid";
        throw ModelError(os.str());
    }

    const std::size_t nodes = range.nodes();
    DeflatedSolution out;
    out.ybar.resize(nodes);
    out.z.resize(nodes - 1);
    out.f.resize(nodes - 1);
    out.ybar[nodes - 1] = terminal;

    double s_last = 0.0, s_next = 0.0;
    if (implicit) {
        out.tail.assign(nodes, 0.0);
        s_last = loss_operator(scenario.loss, grid.t(range.last), backend.law(range.last, terminal), options.loss_tol);
        s_next = s_last;
    }

    for (std::size_t i = range.last; i-- > range.first;) {
        const std::size_t local = i - range.first;
        const double t = grid.t(i);
        const Eigen::VectorXd& next = out.ybar[local + 1];
        const Eigen::VectorXd cond = backend.condexp(i, next);
        ZMatrix z = backend.z(i, next);
        const ZMatrix& z_slot = policy == SlotPolicy::fully_frozen ? frozen.z[local] : z;
        const double my = frozen.mean_y[local];
        const Eigen::VectorXd& mz = frozen.mean_z[local];
        const double g = frozen.resistance[local];

        Eigen::VectorXd fv;
        Eigen::VectorXd yb;
        if (!implicit) {
            fv = evaluate_driver(f, t, frozen.y[local], my, z_slot, mz, g);
            yb = cond + dt * fv;
        } else if (!iterate) {
            fv = evaluate_driver(f, t, cond, my, z_slot, mz, g);
            yb = cond + dt * fv;
            const double rho = loss_operator(scenario.loss, t, backend.law(i, yb), options.loss_tol);
            s_next = std::max(rho, s_next);
        } else {
            // Joint fixed point in (Ybar_i, S_i): the y-slot carries the K tail,
            // which itself depends on the law of Ybar_i.
            Eigen::VectorXd shifted = cond.array() + (s_next - s_last);
            fv = evaluate_driver(f, t, shifted, my, z_slot, mz, g);
            yb = cond + dt * fv;
            bool converged = false;
            double s = s_next;
            for (int it = 0; it < options.implicit_max_iter; ++it) {
                const double rho = loss_operator(scenario.loss, t, backend.law(i, yb), options.loss_tol);
                s = std::max(rho, s_next);
                shifted = yb.array() + (s - s_last);
                fv = evaluate_driver(f, t, shifted, my, z_slot, mz, g);
                Eigen::VectorXd updated = cond + dt * fv;
                const double change = max_abs(updated - yb);
                yb = std::move(updated);
                if (change <= options.implicit_tol * (1.0 + max_abs(yb))) {
                    converged = true;
                    break;
                }
            }
            if (!converged) {
                std::ostringstream os;
                os << "reflect: implicit fixed point at step " << i << " did not converge in "
                   << options.implicit_max_iter << " iterations; use a finer grid";
                throw ModelError(os.str());
            }
            const double rho = loss_operator(scenario.loss, t, backend.law(i, yb), options.loss_tol);
            s_next = std::max(rho, s_next);
        }
        if (implicit) out.tail[local] = s_next - s_last;
        out.ybar[local] = std::move(yb);
        out.z[local] = std::move(z);
        out.f[local] = std::move(fv);
    }
    return out;
}

std::vector<Eigen::VectorXd> x_process(const CondExpBackend& backend, StepRange range,
                                       const Eigen::VectorXd& terminal, const std::vector<Eigen::VectorXd>& f) {
    if (f.size() != range.steps()) throw ModelError("reflect: generator path does not cover the range");
    const double dt = backend.grid().dt;
    std::vector<Eigen::VectorXd> x(range.nodes());
    x.back() = terminal;
    for (std::size_t i = range.last; i-- > range.first;) {
        const std::size_t local = i - range.first;
        x[local] = backend.condexp(i, x[local + 1]) + dt * f[local];
    }
    return x;
}

Eigen::VectorXd build_k(const LossSpec& loss, const CondExpBackend& backend, StepRange range,
                        const std::vector<Eigen::VectorXd>& x, double tol, std::vector<double>* rho) {
    if (x.size() != range.nodes()) throw ModelError("reflect: X does not cover the range");
    const std::size_t nodes = range.nodes();
    std::vector<double> r(nodes), s(nodes);
    for (std::size_t local = 0; local < nodes; ++local) {
        const std::size_t i = range.first + local;
        r[local] = loss_operator(loss, backend.grid().t(i), backend.law(i, x[local]), tol);
    }
    s[nodes - 1] = r[nodes - 1];
    for (std::size_t local = nodes - 1; local-- > 0;) s[local] = std::max(r[local], s[local + 1]);
    Eigen::VectorXd k(static_cast<Eigen::Index>(nodes));
    for (std::size_t local = 0; local < nodes; ++local) k(static_cast<Eigen::Index>(local)) = s[0] - s[local];
    if (rho) *rho = std::move(r);
    return k;
}

ReflectedSolution compose_solution(StepRange range, std::vector<Eigen::VectorXd> ybar, std::vector<ZMatrix> z,
                                   Eigen::VectorXd k) {
    if (ybar.size() != range.nodes() || k.size() != static_cast<Eigen::Index>(range.nodes()) ||
        z.size() != range.steps())
        throw ModelError("reflect: solution shapes disagree with the range");
    ReflectedSolution sol;
    sol.range = range;
    const double k_last = k(k.size() - 1);
    sol.y.reserve(ybar.size());
    for (std::size_t local = 0; local < ybar.size(); ++local)
        sol.y.push_back(ybar[local].array() + (k_last - k(static_cast<Eigen::Index>(local))));
    sol.ybar = std::move(ybar);
    sol.z = std::move(z);
    sol.k = std::move(k);
    return sol;
}

double flatness_residual(const LossSpec& loss, const CondExpBackend& backend, const ReflectedSolution& solution,
                         bool right_endpoint) {
    const StepRange range = solution.range;
    double total = 0.0;
    for (std::size_t local = 0; local + 1 < range.nodes(); ++local) {
        const double dk = solution.k(static_cast<Eigen::Index>(local + 1)) - solution.k(static_cast<Eigen::Index>(local));
        if (dk == 0.0) continue;
        const std::size_t at = right_endpoint ? local + 1 : local;
        const std::size_t i = range.first + at;
        total += expected_loss(loss, backend.grid().t(i), backend.law(i, solution.y[at]), 0.0) * dk;
    }
    return total;
}

ProcessNorms process_norms(const CondExpBackend& backend, StepRange range, const std::vector<Eigen::VectorXd>& y,
                           const std::vector<ZMatrix>& z, const Eigen::VectorXd& k, bool with_bmo) {
    ProcessNorms norms;
    const double dt = backend.grid().dt;
    std::vector<Eigen::VectorXd> squares;
    squares.reserve(y.size());
    for (const auto& v : y) {
        squares.push_back(v.array().square().matrix());
        norms.y_sinf = std::max(norms.y_sinf, max_abs(v));
    }
    norms.y_s2 = std::sqrt(backend.expected_path_max(squares, range.first));

    double h2 = 0.0;
    std::vector<Eigen::VectorXd> zsq(z.size());
    for (std::size_t local = 0; local < z.size(); ++local) {
        zsq[local] = z[local].rowwise().squaredNorm();
        h2 += backend.mean(range.first + local, zsq[local]) * dt;
    }
    norms.z_h2 = std::sqrt(std::max(h2, 0.0));

    // Q_i = |Z_i|^2 dt + E_i[Q_{i+1}], Q_last = 0
    double bmo = 0.0;
    if (with_bmo && !z.empty()) {
        Eigen::VectorXd q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(backend.states(range.last)));
        for (std::size_t i = range.last; i-- > range.first;) {
            const std::size_t local = i - range.first;
            q = zsq[local] * dt + backend.condexp(i, q);
            bmo = std::max(bmo, q.maxCoeff());
        }
    }
    norms.z_bmo = std::sqrt(std::max(bmo, 0.0));
    norms.k_sup = max_abs(k);
    return norms;
}

ProcessNorms empirical_norms(const CondExpBackend& backend, const ReflectedSolution& solution) {
    return process_norms(backend, solution.range, solution.y, solution.z, solution.k);
}

void compute_diagnostics(const ScenarioSpec& scenario, const CondExpBackend& backend, ReflectedSolution& solution,
                         double loss_tol) {
    const StepRange range = solution.range;
    auto& diag = solution.diag;
    diag.constraint.assign(range.nodes(), 0.0);
    diag.constraint_se.assign(range.nodes(), 0.0);
    double max_se = 0.0;
    for (std::size_t local = 0; local < range.nodes(); ++local) {
        const std::size_t i = range.first + local;
        const double t = backend.grid().t(i);
        diag.constraint[local] = expected_loss(scenario.loss, t, backend.law(i, solution.y[local]), 0.0);
        if (!backend.exact()) {
            Eigen::VectorXd values(solution.y[local].size());
            for (Eigen::Index p = 0; p < values.size(); ++p) values(p) = scenario.loss(t, solution.y[local](p));
            diag.constraint_se[local] = standard_error(backend, values);
        }
        max_se = std::max(max_se, diag.constraint_se[local]);
    }
    diag.min_constraint = *std::min_element(diag.constraint.begin(), diag.constraint.end());
    const double k_total = solution.k(solution.k.size() - 1) - solution.k(0);
    diag.eps_constraint = 3.0 * max_se + loss_tol * scenario.loss.C_lip;
    diag.eps_flat = (3.0 * max_se + scenario.loss.c_growth * backend.grid().dt) * k_total + loss_tol;
    diag.flatness_right = flatness_residual(scenario.loss, backend, solution, true);
    diag.flatness_left = flatness_residual(scenario.loss, backend, solution, false);
    diag.x_ybar_gap = 0.0;
    for (std::size_t local = 0; local < solution.x.size() && local < solution.ybar.size(); ++local)
        diag.x_ybar_gap = std::max(diag.x_ybar_gap, max_abs(solution.x[local] - solution.ybar[local]));
    diag.norms = empirical_norms(backend, solution);
}

ReflectedSolution reflect_solve(const ScenarioSpec& scenario, const CondExpBackend& backend, StepRange range,
                                const Eigen::VectorXd& terminal, const FrozenInputs& frozen, SlotPolicy policy,
                                const ReflectOptions& options) {
    DeflatedSolution deflated = solve_deflated(scenario, backend, range, terminal, frozen, policy, options);
    std::vector<Eigen::VectorXd> x = x_process(backend, range, terminal, deflated.f);
    std::vector<double> rho;
    Eigen::VectorXd k = build_k(scenario.loss, backend, range, x, options.loss_tol, &rho);
    ReflectedSolution sol = compose_solution(range, std::move(deflated.ybar), std::move(deflated.z), std::move(k));
    sol.x = std::move(x);
    sol.f = std::move(deflated.f);
    sol.rho = std::move(rho);
    compute_diagnostics(scenario, backend, sol, options.loss_tol);
    if (!deflated.tail.empty()) {
        const double k_last = sol.k(sol.k.size() - 1);
        for (std::size_t local = 0; local < deflated.tail.size(); ++local)
            sol.diag.implicit_tail_gap =
                std::max(sol.diag.implicit_tail_gap,
                         std::abs(deflated.tail[local] - (k_last - sol.k(static_cast<Eigen::Index>(local)))));
    }
    return sol;
}

void inflate_k(ReflectedSolution& solution, double amount) {
    const Eigen::Index last = solution.k.size() - 1;
    solution.k(last) += amount;
    for (Eigen::Index local = 0; local < last; ++local)
        solution.y[static_cast<std::size_t>(local)].array() += amount;
}

}  // namespace mfbsde
