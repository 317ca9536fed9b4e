#include "mfbsde/condexp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mfbsde/parallel.hpp"

namespace mfbsde {

namespace {
constexpr double kConditionWarning = 1e10;
}

Eigen::VectorXd CondExpBackend::mean_z(std::size_t step, const ZMatrix& z) const {
    Eigen::VectorXd out(z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j) out(j) = mean(step, z.col(j));
    return out;
}

ZMatrix one_step_z(const CondExpBackend& backend, std::size_t step, const Eigen::VectorXd& next) {
    return backend.z(step, next);
}

// ---------------------------------------------------------------------------

LatticeModel::LatticeModel(const TimeGrid& grid) : n(grid.n), dt(grid.dt) {
    probabilities.reserve(n + 1);
    Eigen::VectorXd p = Eigen::VectorXd::Ones(1);
    probabilities.push_back(p);
    for (std::size_t i = 1; i <= n; ++i) {
        Eigen::VectorXd q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(i + 1));
        for (Eigen::Index m = 0; m < p.size(); ++m) {
            q(m) += 0.5 * p(m);
            q(m + 1) += 0.5 * p(m);
        }
        probabilities.push_back(q);
        p = std::move(q);
    }
}

double LatticeModel::node_value(std::size_t step, std::size_t m) const {
    return (2.0 * static_cast<double>(m) - static_cast<double>(step)) * std::sqrt(dt);
}

Eigen::VectorXd lattice_condexp(const LatticeModel& model, std::size_t step, const Eigen::VectorXd& next) {
    if (step >= model.n || next.size() != static_cast<Eigen::Index>(step + 2)) {
        std::ostringstream os;
        os << "condexp: lattice step " << step << " expects " << step + 2 << " next values, got " << next.size();
        throw ModelError(os.str());
    }
    const auto count = static_cast<Eigen::Index>(step + 1);
    return 0.5 * (next.head(count) + next.tail(count));
}

LatticeBackend::LatticeBackend(const TimeGrid& grid) : grid_(grid), model_(grid) {}

EmpiricalLaw LatticeBackend::law(std::size_t step, const Eigen::VectorXd& values) const {
    const auto& p = model_.probabilities[step];
    if (values.size() != p.size()) throw ModelError("condexp: lattice law size mismatch");
    return EmpiricalLaw{std::span<const double>(values.data(), static_cast<std::size_t>(values.size())),
                        std::span<const double>(p.data(), static_cast<std::size_t>(p.size()))};
}

Eigen::MatrixXd LatticeBackend::brownian(std::size_t step) const {
    Eigen::MatrixXd b(static_cast<Eigen::Index>(step + 1), 1);
    for (std::size_t m = 0; m <= step; ++m) b(static_cast<Eigen::Index>(m), 0) = model_.node_value(step, m);
    return b;
}

Eigen::VectorXd LatticeBackend::condexp(std::size_t step, const Eigen::VectorXd& next) const {
    return lattice_condexp(model_, step, next);
}

ZMatrix LatticeBackend::z(std::size_t step, const Eigen::VectorXd& next) const {
    if (step >= model_.n || next.size() != static_cast<Eigen::Index>(step + 2))
        throw ModelError("condexp: lattice z index mismatch");
    const auto count = static_cast<Eigen::Index>(step + 1);
    // E[V dB] / dt with dB = +-sqrt(dt), probability 1/2 each
    ZMatrix out(count, 1);
    out.col(0) = (next.tail(count) - next.head(count)) / (2.0 * std::sqrt(model_.dt));
    return out;
}

double LatticeBackend::expected_path_max(std::span<const Eigen::VectorXd> values, std::size_t first) const {
    if (values.empty()) return 0.0;
    const std::size_t last = first + values.size() - 1;
    // E[max] = sum_k (u_k - u_{k-1}) P(max >= u_k) over the sorted distinct
    // node values; each probability is a hitting probability on the lattice.
    std::vector<double> levels;
    for (const auto& v : values)
        for (Eigen::Index m = 0; m < v.size(); ++m) levels.push_back(v(m));
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    double result = 0.0, previous = 0.0;
    for (double u : levels) {
        if (u <= 0.0) continue;
        Eigen::VectorXd hit = (values.back().array() >= u).cast<double>();
        for (std::size_t i = last; i-- > first;) {
            const auto& v = values[i - first];
            Eigen::VectorXd h = lattice_condexp(model_, i, hit);
            for (Eigen::Index m = 0; m < h.size(); ++m)
                if (v(m) >= u) h(m) = 1.0;
            hit = std::move(h);
        }
        const double prob = model_.probabilities[first].dot(hit);
        result += (u - previous) * prob;
        previous = u;
    }
    return result;
}

// ---------------------------------------------------------------------------

RegressionBasis::RegressionBasis(int degree_, int d_) : degree(degree_), d(d_) {
    if (degree < 0) throw ModelError("condexp: basis degree must be nonnegative");
    if (d < 1) throw ModelError("condexp: basis dimension must be positive");
    for (int total = 0; total <= degree; ++total) {
        std::vector<int> e(static_cast<std::size_t>(d), 0);
        // enumerate compositions of `total` into d parts
        auto rec = [&](auto&& self, int pos, int left) -> void {
            if (pos == d - 1) {
                e[static_cast<std::size_t>(pos)] = left;
                exponents.push_back(e);
                return;
            }
            for (int k = left; k >= 0; --k) {
                e[static_cast<std::size_t>(pos)] = k;
                self(self, pos + 1, left - k);
            }
        };
        rec(rec, 0, total);
    }
}

Eigen::MatrixXd RegressionBasis::design(const Eigen::Ref<const Eigen::MatrixXd>& state) const {
    const Eigen::Index rows = state.rows();
    Eigen::MatrixXd out(rows, static_cast<Eigen::Index>(size()));
    for (std::size_t f = 0; f < size(); ++f) {
        auto col = out.col(static_cast<Eigen::Index>(f));
        col.setOnes();
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < exponents[f][static_cast<std::size_t>(j)]; ++k) col.array() *= state.col(j).array();
    }
    return out;
}

namespace {

Eigen::MatrixXd standardized(const ParticleEnsemble& e, std::size_t step, double scale, std::size_t begin,
                             std::size_t end) {
    Eigen::MatrixXd s(static_cast<Eigen::Index>(end - begin), e.d);
    for (int j = 0; j < e.d; ++j)
        s.col(j) = scale * e.states[static_cast<std::size_t>(j)].col(static_cast<Eigen::Index>(step)).segment(
                               static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
    return s;
}

}  // namespace

StepRegression factor_step(const ParticleEnsemble& ensemble, std::size_t step, const RegressionBasis& basis,
                           unsigned workers) {
    StepRegression r;
    const double t = ensemble.grid.t(step);
    if (t <= 0.0) {
        r.constant_only = true;
        return r;
    }
    if (ensemble.N <= basis.size()) {
        std::ostringstream os;
        os << "condexp: need more particles than basis functions (" << basis.size() << ") at step " << step;
        throw ModelError(os.str());
    }
    r.scale = 1.0 / std::sqrt(t);
    const auto p = static_cast<Eigen::Index>(basis.size());
    std::vector<Eigen::MatrixXd> parts(block_count(ensemble.N), Eigen::MatrixXd::Zero(p, p));
    parallel_blocks(ensemble.N, workers, [&](std::size_t begin, std::size_t end, std::size_t b) {
        const Eigen::MatrixXd phi = basis.design(standardized(ensemble, step, r.scale, begin, end));
        parts[b].noalias() = phi.transpose() * phi;
    });
    const Eigen::MatrixXd gram = tree_combine(std::move(parts)) / static_cast<double>(ensemble.N);
    r.gram_qr.compute(gram);
    if (r.gram_qr.rank() < p) {
        std::ostringstream os;
        os << "condexp: rank-deficient regression design at step " << step << " with basis degree " << basis.degree;
        throw ModelError(os.str());
    }
    const auto diag = r.gram_qr.matrixR().diagonal().cwiseAbs();
    r.condition = diag.maxCoeff() / diag.minCoeff();
    return r;
}

namespace {

Eigen::VectorXd project_step(const ParticleEnsemble& e, std::size_t step, const StepRegression& r,
                             const RegressionBasis& basis, const Eigen::VectorXd& samples, unsigned workers) {
    const std::size_t N = e.N;
    if (samples.size() != static_cast<Eigen::Index>(N)) throw ModelError("condexp: sample count mismatch");
    if (r.constant_only) {
        const double m = tree_sum(std::span<const double>(samples.data(), N)) / static_cast<double>(N);
        return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(N), m);
    }
    const auto p = static_cast<Eigen::Index>(basis.size());
    std::vector<Eigen::VectorXd> parts(block_count(N), Eigen::VectorXd::Zero(p));
    parallel_blocks(N, workers, [&](std::size_t begin, std::size_t end, std::size_t b) {
        const Eigen::MatrixXd phi = basis.design(standardized(e, step, r.scale, begin, end));
        parts[b].noalias() = phi.transpose() *
                             samples.segment(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
    });
    const Eigen::VectorXd rhs = tree_combine(std::move(parts)) / static_cast<double>(N);
    const Eigen::VectorXd beta = r.gram_qr.solve(rhs);
    Eigen::VectorXd fit(static_cast<Eigen::Index>(N));
    parallel_blocks(N, workers, [&](std::size_t begin, std::size_t end, std::size_t) {
        const Eigen::MatrixXd phi = basis.design(standardized(e, step, r.scale, begin, end));
        fit.segment(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)).noalias() = phi * beta;
    });
    return fit;
}

}  // namespace

Eigen::VectorXd regress_condexp(const ParticleEnsemble& ensemble, std::size_t step, const Eigen::VectorXd& samples,
                                const RegressionBasis& basis, unsigned workers) {
    if (step >= ensemble.grid.n) throw ModelError("condexp: regression step out of range");
    const StepRegression r = factor_step(ensemble, step, basis, workers);
    return project_step(ensemble, step, r, basis, samples, workers);
}

RegressionBackend::RegressionBackend(const ParticleEnsemble& ensemble, int degree, unsigned workers)
    : ensemble_(&ensemble), basis_(degree, ensemble.d), workers_(workers) {
    steps_.reserve(ensemble.grid.n);
    for (std::size_t i = 0; i < ensemble.grid.n; ++i) {
        steps_.push_back(factor_step(ensemble, i, basis_, workers_));
        if (steps_.back().condition > kConditionWarning) {
            std::ostringstream os;
            os << "condexp: normal equations at step " << i << " have condition estimate " << steps_.back().condition;
            warnings_.push_back(os.str());
        }
    }
}

EmpiricalLaw RegressionBackend::law(std::size_t, const Eigen::VectorXd& values) const {
    return EmpiricalLaw::uniform(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

Eigen::VectorXd RegressionBackend::project(std::size_t step, const Eigen::VectorXd& samples) const {
    if (step >= steps_.size()) throw ModelError("condexp: regression step out of range");
    return project_step(*ensemble_, step, steps_[step], basis_, samples, workers_);
}

Eigen::VectorXd RegressionBackend::condexp(std::size_t step, const Eigen::VectorXd& next) const {
    return project(step, next);
}

ZMatrix RegressionBackend::z(std::size_t step, const Eigen::VectorXd& next) const {
    // The fitted conditional mean is F_{t_i}-measurable, so subtracting it
    // leaves E_{t_i}[V dB] unchanged while removing most of the sampling noise.
    const Eigen::VectorXd centered = next - project(step, next);
    const double dt = ensemble_->grid.dt;
    ZMatrix out(static_cast<Eigen::Index>(ensemble_->N), ensemble_->d);
    for (int j = 0; j < ensemble_->d; ++j) {
        const Eigen::VectorXd target =
            centered.cwiseProduct(ensemble_->increments[static_cast<std::size_t>(j)].col(static_cast<Eigen::Index>(step))) /
            dt;
        out.col(j) = project(step, target);
    }
    return out;
}

double RegressionBackend::expected_path_max(std::span<const Eigen::VectorXd> values, std::size_t) const {
    if (values.empty()) return 0.0;
    Eigen::VectorXd m = values.front();
    for (const auto& v : values.subspan(1)) m = m.cwiseMax(v);
    return tree_sum(std::span<const double>(m.data(), static_cast<std::size_t>(m.size()))) /
           static_cast<double>(m.size());
}

}  // namespace mfbsde
