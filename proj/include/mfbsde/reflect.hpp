#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "mfbsde/condexp.hpp"
#include "mfbsde/model.hpp"

namespace mfbsde {

/// Nodes first..last of the global grid (last > first).
struct StepRange {
    std::size_t first = 0;
    std::size_t last = 0;

    std::size_t steps() const { return last - first; }
    std::size_t nodes() const { return last - first + 1; }
    static StepRange whole(const TimeGrid& grid) { return {0, grid.n}; }
};

/// Which generator arguments come from the previous iterate.
enum class SlotPolicy {
    implicit_y,    ///< current Y and Z; frozen E[y], E[z], G(k)
    fully_frozen,  ///< every argument from the previous iterate
    frozen_y,      ///< frozen pathwise y and E[y], E[z], G(k); current Z
};

/// Generator inputs taken from the previous iterate, one entry per node of the
/// range (`z` and `mean_z` are used on steps, i.e. all nodes but the last).
struct FrozenInputs {
    std::vector<double> mean_y;
    std::vector<Eigen::VectorXd> mean_z;
    std::vector<double> resistance;
    std::vector<Eigen::VectorXd> y;  ///< pathwise y; needed by frozen_y and fully_frozen
    std::vector<ZMatrix> z;          ///< pathwise z; needed by fully_frozen

    /// Inputs of the zero iterate (y, z, k) = (0, 0, 0).
    static FrozenInputs zero(const CondExpBackend& backend, StepRange range);
    void check(StepRange range, SlotPolicy policy) const;
};

struct ProcessNorms {
    double y_s2 = 0.0;    ///< E[sup_t |Y_t|^2]^{1/2}
    double z_h2 = 0.0;    ///< E[sum |Z|^2 dt]^{1/2}
    double y_sinf = 0.0;  ///< max over states and nodes of |Y|
    double k_sup = 0.0;   ///< max |K|
    double z_bmo = 0.0;   ///< (max over nodes, states of E_t[sum_{s>=t} |Z_s|^2 dt])^{1/2}
};

struct ReflectDiagnostics {
    double flatness_right = 0.0;  ///< acceptance value
    double flatness_left = 0.0;
    std::vector<double> constraint;     ///< E[l(t_i, Y_i)] per node
    std::vector<double> constraint_se;  ///< its standard error (0 on exact engines)
    double min_constraint = 0.0;
    double eps_constraint = 0.0;
    double eps_flat = 0.0;
    double x_ybar_gap = 0.0;       ///< max |X - Ybar|
    double implicit_tail_gap = 0.0;  ///< max |tail used inside the implicit solve - K tail|
    ProcessNorms norms;
};

struct ReflectedSolution {
    StepRange range;
    std::vector<Eigen::VectorXd> y;     ///< per node
    std::vector<Eigen::VectorXd> ybar;  ///< per node
    std::vector<Eigen::VectorXd> x;     ///< per node
    std::vector<ZMatrix> z;             ///< per step
    std::vector<Eigen::VectorXd> f;     ///< realized generator per step
    Eigen::VectorXd k;                  ///< per node, k(0) = 0
    std::vector<double> rho;            ///< L_{t_i}(X_{t_i}) per node
    ReflectDiagnostics diag;
};

struct DeflatedSolution {
    std::vector<Eigen::VectorXd> ybar;
    std::vector<ZMatrix> z;
    std::vector<Eigen::VectorXd> f;
    std::vector<double> tail;  ///< S_i used by the implicit solve (empty otherwise)
};

struct ReflectOptions {
    double loss_tol = kLossTolerance;
    int implicit_max_iter = 50;
    double implicit_tol = 1e-12;
};

/// Terminal values xi at the last grid node, one per state.
Eigen::VectorXd terminal_values(const ScenarioSpec& scenario, const CondExpBackend& backend);

/// Backward Euler for the deflated equation
///   Ybar_i = E_i[Ybar_{i+1}] + f(t_i, ...) dt,  Z_i = E_i[Ybar_{i+1} dB_i] / dt.
/// Under implicit_y the y-slot is the current Ybar_i + (S_i - S_last) with
/// S_i = max(L_{t_i}(Ybar_i), S_{i+1}); each step is resolved by fixed-point
/// iteration, which requires lambda dt < 1.
DeflatedSolution solve_deflated(const ScenarioSpec& scenario, const CondExpBackend& backend, StepRange range,
                                const Eigen::VectorXd& terminal, const FrozenInputs& frozen, SlotPolicy policy,
                                const ReflectOptions& options = {});

/// X_i = E_i[xi + sum_{j >= i} f_j dt] along the realized generator path.
std::vector<Eigen::VectorXd> x_process(const CondExpBackend& backend, StepRange range,
                                       const Eigen::VectorXd& terminal, const std::vector<Eigen::VectorXd>& f);

/// K from the backward running maximum S_i = max_{j >= i} L_{t_j}(X_{t_j}):
/// K_i = S_first - S_i. `rho` receives the per-node loss-operator values.
Eigen::VectorXd build_k(const LossSpec& loss, const CondExpBackend& backend, StepRange range,
                        const std::vector<Eigen::VectorXd>& x, double tol = kLossTolerance,
                        std::vector<double>* rho = nullptr);

/// Y_i = Ybar_i + (K_last - K_i).
ReflectedSolution compose_solution(StepRange range, std::vector<Eigen::VectorXd> ybar, std::vector<ZMatrix> z,
                                   Eigen::VectorXd k);

/// sum_i E[l(t_{i+1}, Y_{i+1})] (K_{i+1} - K_i); the left-endpoint variant
/// weights by E[l(t_i, Y_i)].
double flatness_residual(const LossSpec& loss, const CondExpBackend& backend, const ReflectedSolution& solution,
                         bool right_endpoint = true);

ProcessNorms process_norms(const CondExpBackend& backend, StepRange range, const std::vector<Eigen::VectorXd>& y,
                           const std::vector<ZMatrix>& z, const Eigen::VectorXd& k, bool with_bmo = true);

ProcessNorms empirical_norms(const CondExpBackend& backend, const ReflectedSolution& solution);

/// Fills constraint profile, flatness residuals, tolerances and norms.
void compute_diagnostics(const ScenarioSpec& scenario, const CondExpBackend& backend, ReflectedSolution& solution,
                         double loss_tol = kLossTolerance);

/// Complete single-interval solve with fixed generator inputs.
ReflectedSolution reflect_solve(const ScenarioSpec& scenario, const CondExpBackend& backend, StepRange range,
                                const Eigen::VectorXd& terminal, const FrozenInputs& frozen, SlotPolicy policy,
                                const ReflectOptions& options = {});

/// Negative control: adds `amount` to K_last - K_i for every i < last by
/// raising K at the last node, shifting Y up on all earlier nodes.
void inflate_k(ReflectedSolution& solution, double amount);

}  // namespace mfbsde
