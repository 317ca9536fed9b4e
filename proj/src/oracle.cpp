#include "mfbsde/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mfbsde/lossop.hpp"
#include "mfbsde/paths.hpp"

namespace mfbsde {

namespace {

using Level = std::vector<double>;

double average(const Level& v) {
    // Pairwise halving follows the tree structure exactly.
    Level w = v;
    while (w.size() > 1) {
        Level next(w.size() / 2);
        for (std::size_t m = 0; m < next.size(); ++m) next[m] = 0.5 * (w[2 * m] + w[2 * m + 1]);
        w = std::move(next);
    }
    return w.empty() ? 0.0 : w[0];
}

double sup_gap(const std::vector<Level>& a, const std::vector<Level>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t m = 0; m < a[i].size(); ++m) worst = std::max(worst, std::abs(a[i][m] - b[i][m]));
    return worst;
}

double rho_of(const LossSpec& loss, double t, const Level& values, double tol) {
    return loss_operator(loss, t, EmpiricalLaw::uniform(values), tol);
}

struct Iterate {
    std::vector<Level> y, z;
    std::vector<double> k;
};

class TreeSolver {
public:
    TreeSolver(const ScenarioSpec& scenario, std::size_t n, const OracleOptions& options)
        : s_(scenario), n_(n), opt_(options), grid_(make_grid(scenario.T, n)), sq_(std::sqrt(grid_.dt)) {
        b_.resize(n + 1);
        b_[0] = {0.0};
        for (std::size_t i = 0; i < n; ++i) {
            b_[i + 1].resize(b_[i].size() * 2);
            for (std::size_t m = 0; m < b_[i].size(); ++m) {
                b_[i + 1][2 * m] = b_[i][m] - sq_;
                b_[i + 1][2 * m + 1] = b_[i][m] + sq_;
            }
        }
        xi_.resize(b_[n].size());
        for (std::size_t m = 0; m < xi_.size(); ++m) {
            const double state[1] = {b_[n][m]};
            xi_[m] = s_.terminal(std::span<const double>(state, 1));
        }
        policy_ = opt_.slots.value_or(s_.mode() == GeneratorMode::lipschitz ? SlotPolicy::implicit_y
                                                                             : SlotPolicy::frozen_y);
    }

    LatticeSolution run() {
        Iterate prev = zero();
        LatticeSolution sol;
        double best = std::numeric_limits<double>::infinity();
        int since_best = 0;
        for (int sweep = 1; sweep <= opt_.max_iter; ++sweep) {
            LatticeSolution cur = sweep_once(prev);
            Iterate next{cur.y, cur.z, cur.k};
            double dist = std::max(sup_gap(next.y, prev.y), sup_gap(next.z, prev.z));
            for (std::size_t i = 0; i <= n_; ++i) dist = std::max(dist, std::abs(next.k[i] - prev.k[i]));
            cur.distances = sol.distances;
            cur.distances.push_back(dist);
            cur.sweeps = sweep;
            sol = std::move(cur);
            prev = std::move(next);
            if (sweep > 1 && dist <= opt_.picard_tol) return sol;
            if (dist < best) {
                best = dist;
                since_best = 0;
            } else if (++since_best >= 5 && best <= 1e3 * opt_.picard_tol) {
                return sol;  // floating-point floor just above the target
            }
        }
        std::ostringstream os;
        os << "oracle: Picard iteration did not reach " << opt_.picard_tol << " in " << opt_.max_iter << " sweeps";
        throw ModelError(os.str());
    }

private:
    Iterate zero() const {
        Iterate it;
        it.y.resize(n_ + 1);
        it.z.resize(n_);
        for (std::size_t i = 0; i <= n_; ++i) {
            it.y[i].assign(b_[i].size(), 0.0);
            if (i < n_) it.z[i].assign(b_[i].size(), 0.0);
        }
        it.k.assign(n_ + 1, 0.0);
        return it;
    }

    double drive(double t, double y, double my, double z, double mz, double g) const {
        const double zs[1] = {z};
        const double mzs[1] = {mz};
        return s_.driver(t, y, my, std::span<const double>(zs, 1), std::span<const double>(mzs, 1), g);
    }

    LatticeSolution sweep_once(const Iterate& prev) const {
        const double dt = grid_.dt;
        std::vector<double> mean_y(n_ + 1), mean_z(n_, 0.0);
        for (std::size_t i = 0; i <= n_; ++i) mean_y[i] = average(prev.y[i]);
        for (std::size_t i = 0; i < n_; ++i) mean_z[i] = average(prev.z[i]);
        const std::vector<double> g = s_.resistance.apply(prev.k, dt);

        LatticeSolution out;
        out.n = n_;
        out.dt = dt;
        out.ybar.resize(n_ + 1);
        out.z.resize(n_);
        std::vector<Level> fpath(n_);
        out.ybar[n_] = xi_;

        const bool implicit = policy_ == SlotPolicy::implicit_y;
        const bool depends = s_.driver.depends_on_y();
        double s_last = 0.0, s_next = 0.0;
        if (implicit) {
            s_last = rho_of(s_.loss, grid_.t(n_), xi_, opt_.loss_tol);
            s_next = s_last;
        }
        for (std::size_t i = n_; i-- > 0;) {
            const double t = grid_.t(i);
            const Level& up = out.ybar[i + 1];
            const std::size_t count = b_[i].size();
            Level cond(count), z(count), f(count), yb(count);
            for (std::size_t m = 0; m < count; ++m) {
                cond[m] = 0.5 * (up[2 * m] + up[2 * m + 1]);
                z[m] = (up[2 * m + 1] - up[2 * m]) / (2.0 * sq_);
            }
            auto eval = [&](const Level& yslot, double shift) {
                for (std::size_t m = 0; m < count; ++m) {
                    const double zslot = policy_ == SlotPolicy::fully_frozen ? prev.z[i][m] : z[m];
                    f[m] = drive(t, yslot[m] + shift, mean_y[i], zslot, mean_z[i], g[i]);
                    yb[m] = cond[m] + dt * f[m];
                }
            };
            if (!implicit) {
                eval(prev.y[i], 0.0);
            } else if (!depends) {
                eval(cond, 0.0);
                s_next = std::max(s_next, rho_of(s_.loss, t, yb, opt_.loss_tol));
            } else {
                eval(cond, s_next - s_last);
                bool settled = false;
                for (int it = 0; it < 200 && !settled; ++it) {
                    const double s = std::max(s_next, rho_of(s_.loss, t, yb, opt_.loss_tol));
                    const Level before = yb;
                    eval(before, s - s_last);
                    double change = 0.0, size = 0.0;
                    for (std::size_t m = 0; m < count; ++m) {
                        change = std::max(change, std::abs(yb[m] - before[m]));
                        size = std::max(size, std::abs(yb[m]));
                    }
                    settled = change <= 1e-14 * (1.0 + size);
                }
                if (!settled) throw ModelError("oracle: implicit step did not settle");
                s_next = std::max(s_next, rho_of(s_.loss, t, yb, opt_.loss_tol));
            }
            out.ybar[i] = yb;
            out.z[i] = z;
            fpath[i] = f;
        }

        // X_i = E_i[xi + sum_{j >= i} f_j dt] by direct averaging over the leaves of each subtree.
        out.x.resize(n_ + 1);
        Level leaf_sum(xi_.size());
        for (std::size_t leaf = 0; leaf < xi_.size(); ++leaf) leaf_sum[leaf] = xi_[leaf];
        out.x[n_] = xi_;
        for (std::size_t i = n_; i-- > 0;) {
            const std::size_t count = b_[i].size();
            const std::size_t width = xi_.size() / count;
            for (std::size_t leaf = 0; leaf < xi_.size(); ++leaf) leaf_sum[leaf] += fpath[i][leaf / width] * dt;
            out.x[i].assign(count, 0.0);
            for (std::size_t m = 0; m < count; ++m) {
                const Level slice(leaf_sum.begin() + static_cast<std::ptrdiff_t>(m * width),
                                  leaf_sum.begin() + static_cast<std::ptrdiff_t>((m + 1) * width));
                out.x[i][m] = average(slice);
            }
        }

        out.rho.resize(n_ + 1);
        for (std::size_t i = 0; i <= n_; ++i) out.rho[i] = rho_of(s_.loss, grid_.t(i), out.x[i], opt_.loss_tol);
        std::vector<double> sup(n_ + 1);
        sup[n_] = out.rho[n_];
        for (std::size_t i = n_; i-- > 0;) sup[i] = std::max(out.rho[i], sup[i + 1]);
        out.k.resize(n_ + 1);
        for (std::size_t i = 0; i <= n_; ++i) out.k[i] = sup[0] - sup[i];

        out.y.resize(n_ + 1);
        out.mean_y.resize(n_ + 1);
        out.constraint.resize(n_ + 1);
        for (std::size_t i = 0; i <= n_; ++i) {
            out.y[i] = out.ybar[i];
            for (double& v : out.y[i]) v += out.k[n_] - out.k[i];
            out.mean_y[i] = average(out.y[i]);
            Level losses(out.y[i].size());
            for (std::size_t m = 0; m < losses.size(); ++m) losses[m] = s_.loss(grid_.t(i), out.y[i][m]);
            out.constraint[i] = average(losses);
        }
        for (std::size_t i = 0; i < n_; ++i) {
            const double dk = out.k[i + 1] - out.k[i];
            out.flatness_right += out.constraint[i + 1] * dk;
            out.flatness_left += out.constraint[i] * dk;
        }
        return out;
    }

    const ScenarioSpec& s_;
    std::size_t n_;
    OracleOptions opt_;
    TimeGrid grid_;
    double sq_;
    std::vector<Level> b_;
    Level xi_;
    SlotPolicy policy_;
};

std::vector<double> mean_path(const CondExpBackend& backend, const ReflectedSolution& sol) {
    std::vector<double> out;
    for (std::size_t i = 0; i < sol.y.size(); ++i) out.push_back(backend.mean(sol.range.first + i, sol.y[i]));
    return out;
}

double max_gap(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

}  // namespace

LatticeSolution exact_solve(const ScenarioSpec& scenario, std::size_t n, const OracleOptions& options) {
    scenario.check();
    if (scenario.d != 1) throw ModelError("oracle: the path tree needs a one-dimensional Brownian motion");
    if (n < 1 || n > kOracleMaxSteps) {
        std::ostringstream os;
        os << "oracle: step count must lie in [1, " << kOracleMaxSteps << "], got " << n;
        throw ModelError(os.str());
    }
    if (scenario.mode() == GeneratorMode::quadratic && options.slots == SlotPolicy::implicit_y)
        throw ModelError("oracle: quadratic generators freeze the pathwise y argument");
    return TreeSolver(scenario, n, options).run();
}

OracleComparison oracle_compare(const ScenarioSpec& scenario, std::size_t n, const MonteCarloSettings& mc,
                                const PicardOptions& lattice_options, const PicardOptions& mc_options) {
    OracleOptions oo;
    oo.slots = lattice_options.slots;
    const LatticeSolution exact = exact_solve(scenario, n, oo);

    OracleComparison cmp;
    cmp.n = n;
    cmp.exact_mean_y = exact.mean_y;
    cmp.exact_k = exact.k;

    const TimeGrid grid = make_grid(scenario.T, n);
    {
        LatticeBackend lattice(grid);
        PicardOptions opt = lattice_options;
        if (!(opt.tol > 0.0)) opt.tol = 1e-12;
        if (opt.loss_tol == kLossTolerance) opt.loss_tol = oo.loss_tol;
        const PicardResult r = picard_solve(scenario, lattice, opt);
        cmp.lattice_mean_y_path = mean_path(lattice, r.solution);
        cmp.lattice_k_path.assign(r.solution.k.data(), r.solution.k.data() + r.solution.k.size());
        cmp.lattice_mean_y = max_gap(cmp.lattice_mean_y_path, exact.mean_y);
        cmp.lattice_k = max_gap(cmp.lattice_k_path, exact.k);
        cmp.lattice_flatness = std::abs(r.solution.diag.flatness_right - exact.flatness_right);
    }
    {
        const std::size_t base = mc.antithetic ? std::max<std::size_t>(mc.N / 2, 2) : mc.N;
        ParticleEnsemble ens = sample_ensemble(grid, base, scenario.d, mc.seed, mc.workers);
        if (mc.antithetic) ens = antithetic(ens);
        RegressionBackend regression(ens, mc.degree, mc.workers);
        const PicardResult r = picard_solve(scenario, regression, mc_options);
        cmp.regression_mean_y_path = mean_path(regression, r.solution);
        cmp.regression_k_path.assign(r.solution.k.data(), r.solution.k.data() + r.solution.k.size());
        cmp.regression_mean_y = max_gap(cmp.regression_mean_y_path, exact.mean_y);
        cmp.regression_k = max_gap(cmp.regression_k_path, exact.k);
        cmp.regression_flatness = std::abs(r.solution.diag.flatness_right - exact.flatness_right);
    }
    return cmp;
}

}  // namespace mfbsde
