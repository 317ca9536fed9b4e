#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "mfbsde/model.hpp"
#include "mfbsde/picard.hpp"

namespace mfbsde {

inline constexpr std::size_t kOracleMaxSteps = 12;

/// Exact solution on the full path tree (2^i nodes at step i, each with
/// probability 2^-i). Node m at step i has children 2m (down) and 2m + 1 (up).
struct LatticeSolution {
    std::size_t n = 0;
    double dt = 0.0;
    std::vector<std::vector<double>> y, ybar, x, z;  ///< z has n entries (steps)
    std::vector<double> k;
    std::vector<double> rho;
    std::vector<double> mean_y;
    std::vector<double> constraint;  ///< E[l(t_i, Y_i)]
    double flatness_right = 0.0;
    double flatness_left = 0.0;
    std::vector<double> distances;  ///< sup-distance between consecutive Picard iterates
    int sweeps = 0;
};

struct OracleOptions {
    std::optional<SlotPolicy> slots;
    double picard_tol = 1e-12;
    int max_iter = 200;
    double loss_tol = 1e-13;
};

/// Brute-force solve on the path tree. Requires d = 1 and n <= 12.
LatticeSolution exact_solve(const ScenarioSpec& scenario, std::size_t n, const OracleOptions& options = {});

struct MonteCarloSettings {
    std::size_t N = 100000;  ///< total particle count
    std::uint64_t seed = 1;
    int degree = 3;
    bool antithetic = true;
    unsigned workers = 1;
};

struct OracleComparison {
    std::size_t n = 0;
    double lattice_mean_y = 0.0;  ///< max_t |E[Y_t] lattice engine - exact|
    double lattice_k = 0.0;
    double lattice_flatness = 0.0;
    double regression_mean_y = 0.0;  ///< max_t |E[Y_t] regression - exact|
    double regression_k = 0.0;
    double regression_flatness = 0.0;
    std::vector<double> exact_mean_y, exact_k;
    std::vector<double> lattice_mean_y_path, lattice_k_path;
    std::vector<double> regression_mean_y_path, regression_k_path;
};

/// Solves on the same grid with the lattice engine and the regression engine
/// and reports deviations from `exact_solve`.
OracleComparison oracle_compare(const ScenarioSpec& scenario, std::size_t n, const MonteCarloSettings& mc,
                                const PicardOptions& lattice_options = {}, const PicardOptions& mc_options = {});

}  // namespace mfbsde
