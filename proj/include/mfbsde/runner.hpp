#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfbsde/config.hpp"
#include "mfbsde/picard.hpp"
#include "mfbsde/stitch.hpp"

namespace mfbsde {

enum ExitCode : int { kExitOk = 0, kExitVerifyFailed = 1, kExitNoConvergence = 2, kExitConfig = 3 };

/// One completed solve together with the engine it ran on.
struct SolveRun {
    RunConfig config;
    TimeGrid grid;
    std::unique_ptr<ParticleEnsemble> ensemble;
    std::unique_ptr<CondExpBackend> backend;
    ReflectedSolution solution;
    std::vector<PicardHistory> histories;  ///< one per interval, terminal end first
    std::optional<IntervalPlan> plan;
    ConstantsReport constants;
    std::vector<std::string> warnings;
    double runtime_ms = 0.0;
};

/// Builds the engine and solves (single interval or stitched). Throws
/// ModelError, ConfigError or PicardError.
SolveRun run_solve(const RunConfig& config);

/// Constants for a scenario, including max over grid nodes of L_t(0).
ConstantsReport scenario_constants(const ScenarioSpec& scenario, const TimeGrid& grid, double a_tilde = 0.0);

/// Columns: t, mean_Y, std_Y, mean_Z_1..d, K, dK, constraint_value.
std::string results_csv(const SolveRun& run);
nlohmann::json summary_json(const SolveRun& run);

struct VerifyReport {
    bool passed = true;
    nlohmann::json json;
    std::vector<std::string> failed;
};

/// Constraint, both flatness residuals, K monotone, contraction, loss-operator
/// probe and (quadratic) ball membership.
VerifyReport verify_run(const SolveRun& run);

int cmd_solve(const std::string& config_path, const std::string& out_dir, std::ostream& out, std::ostream& err);
int cmd_constants(double C, double L, double lambda, double alpha, std::optional<double> T,
                  std::optional<double> a_tilde, std::ostream& out, std::ostream& err);
int cmd_verify(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_compare_oracle(const std::string& config_path, std::size_t steps, const std::string& out_dir,
                       std::ostream& out, std::ostream& err);

}  // namespace mfbsde
