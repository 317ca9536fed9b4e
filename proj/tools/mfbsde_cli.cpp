#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mfbsde/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Mean-field reflected BSDE solver"};
    app.require_subcommand(1);

    std::string config, out;
    std::size_t steps = 8;

    auto* solve = app.add_subcommand("solve", "Solve a configured scenario and write results.csv and summary.json");
    solve->add_option("--config", config, "Run configuration (JSON)")->required();
    solve->add_option("--out", out, "Output directory");

    double C = 1.0, L = 1.0, lambda = 1.0, alpha = 0.0;
    std::optional<double> T, a_tilde;
    auto* constants = app.add_subcommand("constants", "Print horizon and bound constants as JSON");
    constants->add_option("--C", C, "Loss-operator constant")->required();
    constants->add_option("--L", L, "Bound on the terminal value and f(t,0,...,0)")->required();
    constants->add_option("--lambda", lambda, "Generator constant")->required();
    constants->add_option("--alpha", alpha, "Subquadratic exponent in [0, 1)")->required();
    constants->add_option("--T", T, "Horizon");
    constants->add_option("--A-tilde", a_tilde, "Ball radius (defaults to a_tilde_0)");

    auto* verify = app.add_subcommand("verify", "Solve and check constraint, flatness, monotonicity and contraction");
    verify->add_option("--config", config, "Run configuration (JSON)")->required();

    auto* compare = app.add_subcommand("compare-oracle", "Compare lattice and regression solves with the path-tree oracle");
    compare->add_option("--config", config, "Run configuration (JSON)")->required();
    compare->add_option("--steps", steps, "Grid steps (at most 12)")->required();
    compare->add_option("--out", out, "Directory for oracle_comparison.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : mfbsde::kExitConfig;
    }

    if (*solve) return mfbsde::cmd_solve(config, out, std::cout, std::cerr);
    if (*constants) return mfbsde::cmd_constants(C, L, lambda, alpha, T, a_tilde, std::cout, std::cerr);
    if (*verify) return mfbsde::cmd_verify(config, std::cout, std::cerr);
    if (*compare) return mfbsde::cmd_compare_oracle(config, steps, out, std::cout, std::cerr);
    return mfbsde::kExitConfig;
}
