#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfbsde/lossop.hpp"
#include "mfbsde/paths.hpp"

namespace mfbsde {

/// Per-state Z values at one node: states x d, rows contiguous.
using ZMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Conditional-expectation engine over a discrete state space.
///
/// At grid step i the engine exposes `states(i)` states (lattice nodes or
/// particles) with probability weights. All process values handed to the
/// engine are vectors indexed by those states.
class CondExpBackend {
public:
    virtual ~CondExpBackend() = default;

    virtual const TimeGrid& grid() const = 0;
    virtual int dim() const = 0;
    virtual std::size_t states(std::size_t step) const = 0;
    /// Law of `values` (indexed by the states at `step`).
    virtual EmpiricalLaw law(std::size_t step, const Eigen::VectorXd& values) const = 0;
    /// Brownian state B_{t_i}, states(i) x d.
    virtual Eigen::MatrixXd brownian(std::size_t step) const = 0;
    /// E_{t_i}[V_{t_{i+1}}] for every state at step i.
    virtual Eigen::VectorXd condexp(std::size_t step, const Eigen::VectorXd& next) const = 0;
    /// E_{t_i}[V_{t_{i+1}} dB_i] / dt for every state at step i.
    virtual ZMatrix z(std::size_t step, const Eigen::VectorXd& next) const = 0;
    /// E[max_{first <= i < first + values.size()} V_i] for nonnegative V.
    virtual double expected_path_max(std::span<const Eigen::VectorXd> values, std::size_t first) const = 0;
    /// True when expectations carry no sampling error.
    virtual bool exact() const = 0;
    /// Particle count behind sampling errors; 0 for exact engines.
    virtual std::size_t sample_size() const = 0;
    virtual std::string name() const = 0;

    double mean(std::size_t step, const Eigen::VectorXd& values) const { return law(step, values).mean(); }
    Eigen::VectorXd mean_z(std::size_t step, const ZMatrix& z) const;
};

ZMatrix one_step_z(const CondExpBackend& backend, std::size_t step, const Eigen::VectorXd& next);

// ---------------------------------------------------------------------------
// Recombining binomial lattice, d = 1

/// Node m of step i sits at B = (2m - i) sqrt(dt), m = 0..i, with probability
/// C(i, m) / 2^i.
struct LatticeModel {
    std::size_t n = 1;
    double dt = 1.0;
    std::vector<Eigen::VectorXd> probabilities;

    explicit LatticeModel(const TimeGrid& grid);
    double node_value(std::size_t step, std::size_t m) const;
};

Eigen::VectorXd lattice_condexp(const LatticeModel& model, std::size_t step, const Eigen::VectorXd& next);

class LatticeBackend final : public CondExpBackend {
public:
    explicit LatticeBackend(const TimeGrid& grid);

    const TimeGrid& grid() const override { return grid_; }
    int dim() const override { return 1; }
    std::size_t states(std::size_t step) const override { return step + 1; }
    EmpiricalLaw law(std::size_t step, const Eigen::VectorXd& values) const override;
    Eigen::MatrixXd brownian(std::size_t step) const override;
    Eigen::VectorXd condexp(std::size_t step, const Eigen::VectorXd& next) const override;
    ZMatrix z(std::size_t step, const Eigen::VectorXd& next) const override;
    double expected_path_max(std::span<const Eigen::VectorXd> values, std::size_t first) const override;
    bool exact() const override { return true; }
    std::size_t sample_size() const override { return 0; }
    std::string name() const override { return "lattice"; }

    const LatticeModel& model() const { return model_; }

private:
    TimeGrid grid_;
    LatticeModel model_;
};

// ---------------------------------------------------------------------------
// Least-squares regression Monte Carlo

/// Monomials of total degree <= degree in d variables, graded order. The
/// regressor is the standardized state B_{t_i} / sqrt(t_i), which spans the
/// same polynomial space as B_{t_i}.
struct RegressionBasis {
    int degree = 3;
    int d = 1;
    std::vector<std::vector<int>> exponents;

    RegressionBasis(int degree, int d);
    std::size_t size() const { return exponents.size(); }
    /// Feature rows for `state` rows (already standardized).
    Eigen::MatrixXd design(const Eigen::Ref<const Eigen::MatrixXd>& state) const;
};

/// Normal-equation factorization of one step's design.
struct StepRegression {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> gram_qr;
    double scale = 1.0;  ///< 1 / sqrt(t_i)
    double condition = 1.0;
    bool constant_only = false;  ///< step with deterministic state (t = 0)
};

StepRegression factor_step(const ParticleEnsemble& ensemble, std::size_t step, const RegressionBasis& basis,
                           unsigned workers = 1);

/// Least-squares projection of step-(i+1) samples on basis functions of B_{t_i}.
Eigen::VectorXd regress_condexp(const ParticleEnsemble& ensemble, std::size_t step, const Eigen::VectorXd& samples,
                                const RegressionBasis& basis, unsigned workers = 1);

class RegressionBackend final : public CondExpBackend {
public:
    /// The ensemble must outlive the backend.
    RegressionBackend(const ParticleEnsemble& ensemble, int degree, unsigned workers = 1);

    const TimeGrid& grid() const override { return ensemble_->grid; }
    int dim() const override { return ensemble_->d; }
    std::size_t states(std::size_t) const override { return ensemble_->N; }
    EmpiricalLaw law(std::size_t step, const Eigen::VectorXd& values) const override;
    Eigen::MatrixXd brownian(std::size_t step) const override { return ensemble_->state(step); }
    Eigen::VectorXd condexp(std::size_t step, const Eigen::VectorXd& next) const override;
    ZMatrix z(std::size_t step, const Eigen::VectorXd& next) const override;
    double expected_path_max(std::span<const Eigen::VectorXd> values, std::size_t first) const override;
    bool exact() const override { return false; }
    std::size_t sample_size() const override { return ensemble_->N; }
    std::string name() const override { return "regression"; }

    const RegressionBasis& basis() const { return basis_; }
    const ParticleEnsemble& ensemble() const { return *ensemble_; }
    /// Steps whose normal equations exceeded condition number 1e10.
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    Eigen::VectorXd project(std::size_t step, const Eigen::VectorXd& samples) const;

    const ParticleEnsemble* ensemble_;
    RegressionBasis basis_;
    unsigned workers_;
    std::vector<StepRegression> steps_;
    std::vector<std::string> warnings_;
};

}  // namespace mfbsde
