#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfbsde/constants.hpp"
#include "mfbsde/reflect.hpp"

namespace mfbsde {

struct PicardOptions {
    double tol = 0.0;  ///< 0 selects 1e-8 on exact engines, 1e-4 on sampled ones
    int max_iter = 50;
    std::optional<SlotPolicy> slots;  ///< default: implicit_y (lipschitz), frozen_y (quadratic)
    double a_tilde = 0.0;             ///< quadratic ball radius; 0 selects a_tilde_0(C, L, lambda)
    double bound_L = 0.0;             ///< L in the quadratic horizon formulas; 0 selects scenario.L()
    double loss_tol = kLossTolerance;
    double stagnation = 1e-3;  ///< stop when a sweep improves on the one 3 back by less than this fraction
    bool probe_hl = true;
};

/// Summary of one sweep's iterate.
struct SweepRecord {
    ProcessNorms norms;
    double flatness_right = 0.0;
    double min_constraint = 0.0;
    double mean_y0 = 0.0;
    double k_last = 0.0;
};

struct PicardHistory {
    GeneratorMode mode = GeneratorMode::lipschitz;
    double tol = 0.0;
    double horizon = 0.0;
    double delta = 0.0;   ///< contraction horizon of the mode
    double a_tilde = 0.0; ///< quadratic mode only
    std::vector<double> distances;  ///< distances[i] = dist(iterate i+1, iterate i)
    std::vector<double> ratios;     ///< distances[i+1] / distances[i] where distances[i] > 0
    std::vector<double> hl_ratios;  ///< worst loss-operator probe per sweep from the second on
    std::vector<SweepRecord> sweeps;
    std::vector<std::string> warnings;
    std::string stop_reason;
    bool ball_violated = false;

    /// Per-sweep contraction bound: 1/sqrt(2) in the
    /// root-sum-square metric (lipschitz) or 1/2 in the sum metric (quadratic).
    double bound() const;
    std::string metric() const;
};

class PicardError : public std::runtime_error {
public:
    PicardError(const std::string& what, PicardHistory history)
        : std::runtime_error(what), history_(std::move(history)) {}
    const PicardHistory& history() const { return history_; }

private:
    PicardHistory history_;
};

struct PicardResult {
    ReflectedSolution solution;
    PicardHistory history;
};

/// Distance between consecutive iterates in the norm family of `mode`:
/// lipschitz sqrt(|dY|_S2^2 + |dZ|_H2^2 + sup|dK|^2), quadratic |dY|_Sinf + |dZ|_BMO + sup|dK|.
double iterate_distance(const CondExpBackend& backend, GeneratorMode mode, StepRange range,
                        const ReflectedSolution& a, const ReflectedSolution* b);

/// Generator inputs frozen at an iterate.
FrozenInputs freeze(const ScenarioSpec& scenario, const CondExpBackend& backend, const ReflectedSolution& iterate);

/// Picard recurrence started from (0, 0, 0) on the nodes of `range`, with
/// terminal values at range.last. Throws PicardError after max_iter sweeps
/// without reaching tol.
PicardResult picard_solve(const ScenarioSpec& scenario, const CondExpBackend& backend, StepRange range,
                          const Eigen::VectorXd& terminal, const PicardOptions& options = {});

/// Whole-grid solve with terminal xi.
PicardResult picard_solve(const ScenarioSpec& scenario, const CondExpBackend& backend,
                          const PicardOptions& options = {});

struct ContractionEstimate {
    double ratio = 0.0;  ///< max over recorded sweeps of dist_{i+1} / dist_i
    double bound = 0.0;
    std::string metric;
};

/// Needs at least two distances with a positive first one.
ContractionEstimate contraction_estimate(const PicardHistory& history);

}  // namespace mfbsde
