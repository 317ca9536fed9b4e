#include "mfbsde/picard.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mfbsde {

double PicardHistory::bound() const { return mode == GeneratorMode::lipschitz ? 1.0 / std::sqrt(2.0) : 0.5; }

std::string PicardHistory::metric() const {
    return mode == GeneratorMode::lipschitz ? "sqrt(S2^2 + H2^2 + sup K^2)" : "Sinf + BMO + sup K";
}

double iterate_distance(const CondExpBackend& backend, GeneratorMode mode, StepRange range,
                        const ReflectedSolution& a, const ReflectedSolution* b) {
    std::vector<Eigen::VectorXd> dy(a.y);
    std::vector<ZMatrix> dz(a.z);
    Eigen::VectorXd dk = a.k;
    if (b) {
        for (std::size_t i = 0; i < dy.size(); ++i) dy[i] -= b->y[i];
        for (std::size_t i = 0; i < dz.size(); ++i) dz[i] -= b->z[i];
        dk -= b->k;
    }
    const bool quadratic = mode == GeneratorMode::quadratic;
    const ProcessNorms n = process_norms(backend, range, dy, dz, dk, quadratic);
    if (quadratic) return n.y_sinf + n.z_bmo + n.k_sup;
    return std::sqrt(n.y_s2 * n.y_s2 + n.z_h2 * n.z_h2 + n.k_sup * n.k_sup);
}

FrozenInputs freeze(const ScenarioSpec& scenario, const CondExpBackend& backend, const ReflectedSolution& iterate) {
    const StepRange range = iterate.range;
    FrozenInputs in;
    const std::size_t nodes = range.nodes();
    in.mean_y.resize(nodes);
    in.mean_z.assign(nodes, Eigen::VectorXd::Zero(backend.dim()));
    for (std::size_t local = 0; local < nodes; ++local) {
        const std::size_t i = range.first + local;
        in.mean_y[local] = backend.mean(i, iterate.y[local]);
        if (local < iterate.z.size()) in.mean_z[local] = backend.mean_z(i, iterate.z[local]);
    }
    const std::vector<double> k(iterate.k.data(), iterate.k.data() + iterate.k.size());
    in.resistance = scenario.resistance.apply(k, backend.grid().dt);
    in.y = iterate.y;
    in.z = iterate.z;
    return in;
}

namespace {

ReflectedSolution zero_iterate(const CondExpBackend& backend, StepRange range) {
    ReflectedSolution zero;
    zero.range = range;
    for (std::size_t i = range.first; i <= range.last; ++i) {
        const auto s = static_cast<Eigen::Index>(backend.states(i));
        zero.y.push_back(Eigen::VectorXd::Zero(s));
        if (i < range.last) zero.z.push_back(ZMatrix::Zero(s, backend.dim()));
    }
    zero.k = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(range.nodes()));
    return zero;
}

double hl_probe(const ScenarioSpec& scenario, const CondExpBackend& backend, const ReflectedSolution& a,
                const ReflectedSolution& b, double tol) {
    double worst = 0.0;
    for (std::size_t local = 0; local < a.x.size(); ++local) {
        const std::size_t i = a.range.first + local;
        const std::vector<std::pair<EmpiricalLaw, EmpiricalLaw>> pairs{
            {backend.law(i, a.x[local]), backend.law(i, b.x[local])}};
        worst = std::max(worst, hl_lipschitz_probe(scenario.loss, backend.grid().t(i), pairs, tol));
    }
    return worst;
}

}  // namespace

PicardResult picard_solve(const ScenarioSpec& scenario, const CondExpBackend& backend, StepRange range,
                          const Eigen::VectorXd& terminal, const PicardOptions& options) {
    scenario.check();
    const GeneratorMode mode = scenario.mode();
    const SlotPolicy policy =
        options.slots.value_or(mode == GeneratorMode::lipschitz ? SlotPolicy::implicit_y : SlotPolicy::frozen_y);
    if (mode == GeneratorMode::quadratic && policy == SlotPolicy::implicit_y)
        throw ModelError("picard: quadratic generators freeze the pathwise y argument");

    PicardHistory history;
    history.mode = mode;
    history.tol = options.tol > 0.0 ? options.tol : (backend.exact() ? 1e-8 : 1e-4);
    history.horizon = static_cast<double>(range.steps()) * backend.grid().dt;

    const double C = scenario.C();
    const double lambda = scenario.driver.lambda;
    if (mode == GeneratorMode::lipschitz) {
        history.delta = delta_lipschitz(C, lambda);
    } else {
        const double L = options.bound_L > 0.0 ? options.bound_L : scenario.L();
        const double a0 = a_tilde_0(C, L, lambda);
        history.a_tilde = options.a_tilde > 0.0 ? options.a_tilde : a0;
        if (history.a_tilde < a0) {
            std::ostringstream os;
            os << "picard: ball radius " << history.a_tilde << " is below a_tilde_0 = " << a0;
            throw ModelError(os.str());
        }
        history.delta = delta_hat(history.a_tilde, C, L, lambda, scenario.driver.alpha);
    }
    if (history.horizon > history.delta * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "picard: horizon " << history.horizon << " exceeds the contraction horizon " << history.delta
           << "; convergence is not guaranteed";
        history.warnings.push_back(os.str());
    }

    ReflectOptions ropt;
    ropt.loss_tol = options.loss_tol;

    ReflectedSolution previous = zero_iterate(backend, range);
    FrozenInputs frozen = FrozenInputs::zero(backend, range);
    for (int sweep = 1; sweep <= options.max_iter; ++sweep) {
        ReflectedSolution current = reflect_solve(scenario, backend, range, terminal, frozen, policy, ropt);
        const double dist = iterate_distance(backend, mode, range, current, sweep == 1 ? nullptr : &previous);
        if (!history.distances.empty() && history.distances.back() > 0.0)
            history.ratios.push_back(dist / history.distances.back());
        history.distances.push_back(dist);
        if (options.probe_hl && sweep > 1)
            history.hl_ratios.push_back(hl_probe(scenario, backend, current, previous, options.loss_tol));

        SweepRecord rec;
        rec.norms = current.diag.norms;
        rec.flatness_right = current.diag.flatness_right;
        rec.min_constraint = current.diag.min_constraint;
        rec.mean_y0 = backend.mean(range.first, current.y.front());
        rec.k_last = current.k(current.k.size() - 1);
        history.sweeps.push_back(rec);

        if (mode == GeneratorMode::quadratic) {
            const auto& n = rec.norms;
            if (n.y_sinf > history.a_tilde || n.z_bmo > history.a_tilde || n.k_sup > history.a_tilde) {
                history.ball_violated = true;
                std::ostringstream os;
                os << "picard: iterate " << sweep << " leaves the ball of radius " << history.a_tilde
                   << " (|Y|_inf = " << n.y_sinf << ", BMO proxy = " << n.z_bmo << ", sup K = " << n.k_sup << ")";
                history.warnings.push_back(os.str());
            }
        }

        const std::size_t m = history.distances.size();
        bool done = false;
        if (sweep > 1 && dist <= history.tol) {
            history.stop_reason = "tolerance";
            done = true;
        } else if (m >= 4 && dist > (1.0 - options.stagnation) * history.distances[m - 4]) {
            history.stop_reason = "stagnation";
            std::ostringstream os;
            os << "picard: distance stagnated at " << dist << " after " << sweep << " sweeps";
            history.warnings.push_back(os.str());
            done = true;
        }
        if (done) return PicardResult{std::move(current), std::move(history)};
        frozen = freeze(scenario, backend, current);
        previous = std::move(current);
    }
    history.stop_reason = "max_iter";
    std::ostringstream os;
    os << "picard: no convergence after " << options.max_iter << " sweeps (last distance "
       << (history.distances.empty() ? 0.0 : history.distances.back()) << ", tol " << history.tol << ")";
    throw PicardError(os.str(), std::move(history));
}

PicardResult picard_solve(const ScenarioSpec& scenario, const CondExpBackend& backend, const PicardOptions& options) {
    return picard_solve(scenario, backend, StepRange::whole(backend.grid()), terminal_values(scenario, backend),
                        options);
}

ContractionEstimate contraction_estimate(const PicardHistory& history) {
    if (history.distances.size() < 2 || !(history.distances.front() > 0.0))
        throw ModelError("picard: contraction estimate needs two sweeps with a nonzero first distance");
    ContractionEstimate est;
    est.bound = history.bound();
    est.metric = history.metric();
    for (double r : history.ratios) est.ratio = std::max(est.ratio, r);
    return est;
}

}  // namespace mfbsde
