#include "mfbsde/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "mfbsde/oracle.hpp"

namespace mfbsde {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json norms_json(const ProcessNorms& n) {
    return {{"Y_S2", n.y_s2}, {"Z_H2", n.z_h2}, {"Y_Sinf", n.y_sinf}, {"K_sup", n.k_sup}, {"Z_BMO_proxy", n.z_bmo}};
}

PicardOptions picard_options(const RunConfig& c) {
    PicardOptions o;
    if (c.picard_tol) o.tol = *c.picard_tol;
    o.max_iter = c.max_iter;
    o.slots = c.slots;
    o.a_tilde = c.a_tilde;
    o.loss_tol = c.loss_tol;
    return o;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cli: cannot write '" + path.string() + "'");
    out << content;
}

std::optional<ContractionEstimate> estimate(const PicardHistory& h) {
    if (h.distances.size() < 2 || !(h.distances.front() > 0.0)) return std::nullopt;
    return contraction_estimate(h);
}

}  // namespace

ConstantsReport scenario_constants(const ScenarioSpec& scenario, const TimeGrid& grid, double a_tilde) {
    const double L = scenario.L();
    ConstantsReport r = compute_constants(scenario.C(), std::isfinite(L) ? L : 0.0, scenario.driver.lambda,
                                          scenario.driver.alpha, grid.T, a_tilde);
    const double zero[1] = {0.0};
    for (std::size_t i = 0; i <= grid.n; ++i)
        r.l_t_zero_max = std::max(
            r.l_t_zero_max, loss_operator(scenario.loss, grid.t(i), EmpiricalLaw::uniform(std::span<const double>(zero, 1))));
    r.has_l_t_zero = true;
    return r;
}

SolveRun run_solve(const RunConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    SolveRun run;
    run.config = config;
    run.grid = make_grid(config.scenario.T, config.n);
    if (config.backend == "lattice") {
        run.backend = std::make_unique<LatticeBackend>(run.grid);
    } else {
        const std::size_t base = config.antithetic ? config.N / 2 : config.N;
        run.ensemble =
            std::make_unique<ParticleEnsemble>(sample_ensemble(run.grid, base, config.scenario.d, config.seed, config.workers));
        if (config.antithetic) *run.ensemble = antithetic(*run.ensemble);
        auto reg = std::make_unique<RegressionBackend>(*run.ensemble, config.degree, config.workers);
        run.warnings = reg->warnings();
        run.backend = std::move(reg);
    }

    const PicardOptions opt = picard_options(config);
    if (config.stitch) {
        run.plan = plan_intervals(config.scenario, run.grid, config.intervals);
        GlobalSolution global = solve_global(config.scenario, *run.backend, *run.plan, opt);
        run.solution = std::move(global.solution);
        run.histories = std::move(global.histories);
        for (std::size_t j = 0; j < global.seam_constraint.size(); ++j)
            if (global.seam_constraint[j] < -run.solution.diag.eps_constraint) {
                std::ostringstream os;
                os << "stitch: constraint at seam " << j + 1 << " is " << global.seam_constraint[j];
                run.warnings.push_back(os.str());
            }
    } else {
        PicardResult r = picard_solve(config.scenario, *run.backend, opt);
        run.solution = std::move(r.solution);
        run.histories.push_back(std::move(r.history));
    }
    for (const auto& h : run.histories) run.warnings.insert(run.warnings.end(), h.warnings.begin(), h.warnings.end());

    if (config.inflate_k != 0.0) {
        inflate_k(run.solution, config.inflate_k);
        compute_diagnostics(config.scenario, *run.backend, run.solution, config.loss_tol);
        run.warnings.push_back("debug: K inflated at the terminal node by " + fmt(config.inflate_k));
    }
    if (!std::isfinite(config.scenario.L()))
        run.warnings.push_back("constants: terminal condition is unbounded; quadratic-mode constants use L = 0");
    run.constants = scenario_constants(config.scenario, run.grid, config.a_tilde);
    run.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return run;
}

std::string results_csv(const SolveRun& run) {
    const CondExpBackend& backend = *run.backend;
    const ReflectedSolution& sol = run.solution;
    const int d = backend.dim();
    std::ostringstream os;
    os << "t,mean_Y,std_Y";
    for (int j = 1; j <= d; ++j) os << ",mean_Z_" << j;
    os << ",K,dK,constraint_value\n";
    for (std::size_t i = 0; i <= run.grid.n; ++i) {
        const EmpiricalLaw law = backend.law(i, sol.y[i]);
        const double mean = law.mean();
        Eigen::VectorXd dev = (sol.y[i].array() - mean).square().matrix();
        const double var = backend.law(i, dev).mean();
        os << fmt(run.grid.t(i)) << ',' << fmt(mean) << ',' << fmt(std::sqrt(var));
        if (i < run.grid.n) {
            const Eigen::VectorXd mz = backend.mean_z(i, sol.z[i]);
            for (int j = 0; j < d; ++j) os << ',' << fmt(mz(j));
        } else {
            for (int j = 0; j < d; ++j) os << ',';
        }
        const auto ii = static_cast<Eigen::Index>(i);
        os << ',' << fmt(sol.k(ii)) << ',' << fmt(i == 0 ? 0.0 : sol.k(ii) - sol.k(ii - 1)) << ','
           << fmt(sol.diag.constraint[i]) << '\n';
    }
    return os.str();
}

json summary_json(const SolveRun& run) {
    const auto& diag = run.solution.diag;
    json j;
    j["flatness_residual"] = diag.flatness_right;
    j["flatness_residual_left"] = diag.flatness_left;
    j["min_constraint"] = diag.min_constraint;
    j["tolerances"] = {{"constraint", run.config.eps_constraint.value_or(diag.eps_constraint)},
                       {"flatness", run.config.eps_flat.value_or(diag.eps_flat)}};
    if (run.histories.size() == 1) {
        j["picard_distances"] = run.histories.front().distances;
    } else {
        json all = json::array();
        for (const auto& h : run.histories) all.push_back(h.distances);
        j["picard_distances"] = all;
    }
    json stops = json::array();
    double ratio = -1.0;
    for (const auto& h : run.histories) {
        stops.push_back(h.stop_reason);
        if (auto e = estimate(h)) ratio = std::max(ratio, e->ratio);
    }
    j["contraction_ratio"] = ratio >= 0.0 ? json(ratio) : json(nullptr);
    j["contraction_bound"] = run.histories.empty() ? json(nullptr) : json(run.histories.front().bound());
    j["stop_reason"] = stops;
    j["intervals"] = run.histories.size();
    j["norms"] = norms_json(diag.norms);
    j["constants_report"] = constants_to_json(run.constants);
    j["seed"] = run.config.seed;
    j["runtime_ms"] = run.runtime_ms;
    j["scenario_hash"] = scenario_hash(run.config.scenario);
    j["config"] = run.config.resolved();
    j["warnings"] = run.warnings;
    return j;
}

VerifyReport verify_run(const SolveRun& run) {
    VerifyReport report;
    const ReflectedSolution& sol = run.solution;
    const auto& diag = sol.diag;
    const ScenarioSpec& s = run.config.scenario;
    json checks = json::array();
    auto add = [&](const std::string& name, bool passed, double value, double limit, bool advisory = false,
                   const std::string& note = "") {
        json c = {{"name", name}, {"passed", passed}, {"value", value}, {"limit", limit}, {"advisory", advisory}};
        if (!note.empty()) c["note"] = note;
        checks.push_back(c);
        if (!passed && !advisory) {
            report.passed = false;
            report.failed.push_back(name);
        }
    };

    double worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < diag.constraint.size(); ++i) {
        const double eps = run.config.eps_constraint.value_or(3.0 * diag.constraint_se[i] + run.config.loss_tol * s.loss.C_lip);
        worst_margin = std::min(worst_margin, diag.constraint[i] + eps);
    }
    add("constraint", worst_margin >= 0.0, diag.min_constraint, -(diag.min_constraint - worst_margin));

    const double eps_flat = run.config.eps_flat.value_or(diag.eps_flat);
    add("flatness_right", std::abs(diag.flatness_right) <= eps_flat, diag.flatness_right, eps_flat);
    add("flatness_left", std::abs(diag.flatness_left) <= eps_flat, diag.flatness_left, eps_flat);

    bool monotone = sol.k(0) == 0.0;
    double worst_step = 0.0;
    for (Eigen::Index i = 1; i < sol.k.size(); ++i) {
        worst_step = std::min(worst_step, sol.k(i) - sol.k(i - 1));
        if (sol.k(i) < sol.k(i - 1)) monotone = false;
    }
    add("k_monotone", monotone, worst_step, 0.0);

    for (std::size_t h = 0; h < run.histories.size(); ++h) {
        const PicardHistory& hist = run.histories[h];
        const std::string suffix = run.histories.size() > 1 ? "_interval_" + std::to_string(h + 1) : "";
        const bool beyond = hist.horizon > hist.delta * (1.0 + 1e-12);
        if (auto e = estimate(hist)) {
            add("contraction" + suffix, e->ratio <= e->bound + 0.1, e->ratio, e->bound + 0.1, beyond,
                beyond ? "horizon exceeds the contraction horizon; advisory" : e->metric);
        } else {
            add("contraction" + suffix, true, 0.0, hist.bound() + 0.1, true, "fewer than two nonzero distances");
        }
        double hl = 0.0;
        for (double r : hist.hl_ratios) hl = std::max(hl, r);
        add("hl_probe" + suffix, hl <= 1.0 + 1e-6, hl, 1.0 + 1e-6);
        if (hist.mode == GeneratorMode::quadratic)
            add("ball" + suffix, !hist.ball_violated, hist.sweeps.empty() ? 0.0 : hist.sweeps.back().norms.y_sinf,
                hist.a_tilde, beyond);
    }
    report.json = {{"passed", report.passed}, {"checks", checks}, {"failed", report.failed},
                   {"warnings", run.warnings}, {"scenario_hash", scenario_hash(s)}};
    return report;
}

int cmd_solve(const std::string& config_path, const std::string& out_dir, std::ostream& out, std::ostream& err) {
    RunConfig config;
    try {
        config = load_config(config_path);
    } catch (const ConfigError& e) {
        err << e.what() << '\n';
        return kExitConfig;
    }
    const std::string dir = out_dir.empty() ? config.output : out_dir;
    if (dir.empty()) {
        err << "cli: no output directory (use --out or the 'output' key)\n";
        return kExitConfig;
    }
    try {
        const SolveRun run = run_solve(config);
        std::filesystem::create_directories(dir);
        write_file(std::filesystem::path(dir) / "results.csv", results_csv(run));
        write_file(std::filesystem::path(dir) / "summary.json", summary_json(run).dump(2) + "\n");
        out << "solved " << config.scenario.name << ": K_T = " << fmt(run.solution.k(run.solution.k.size() - 1))
            << ", flatness = " << fmt(run.solution.diag.flatness_right) << ", sweeps = " << run.histories.back().distances.size()
            << '\n';
        for (const auto& w : run.warnings) err << "warning: " << w << '\n';
        return kExitOk;
    } catch (const PicardError& e) {
        err << e.what() << '\n';
        return kExitNoConvergence;
    } catch (const ModelError& e) {
        err << e.what() << '\n';
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << e.what() << '\n';
        return kExitConfig;
    }
}

int cmd_constants(double C, double L, double lambda, double alpha, std::optional<double> T,
                  std::optional<double> a_tilde, std::ostream& out, std::ostream& err) {
    try {
        if (!(C >= 0.0) || !(L > 0.0) || !(lambda > 0.0)) throw ModelError("constants: need C >= 0, L > 0, lambda > 0");
        if (T && !(*T > 0.0)) throw ModelError("constants: T must be positive");
        if (a_tilde && !(*a_tilde > 0.0)) throw ModelError("constants: A-tilde must be positive");
        const ConstantsReport r = compute_constants(C, L, lambda, alpha, T.value_or(0.0), a_tilde.value_or(0.0));
        json j = constants_to_json(r);
        if (!T) {
            j.erase("l_bar_1");
            j.erase("l_bar_2");
            j.erase("l_bar");
            j["inputs"]["T"] = nullptr;
        }
        if (a_tilde && *a_tilde < r.a_tilde_0) j["warning"] = "A-tilde is below a_tilde_0";
        out << j.dump(2) << '\n';
        return kExitOk;
    } catch (const ModelError& e) {
        err << e.what() << '\n';
        return kExitConfig;
    }
}

int cmd_verify(const std::string& config_path, std::ostream& out, std::ostream& err) {
    RunConfig config;
    try {
        config = load_config(config_path);
    } catch (const ConfigError& e) {
        err << e.what() << '\n';
        return kExitConfig;
    }
    try {
        const SolveRun run = run_solve(config);
        const VerifyReport report = verify_run(run);
        out << report.json.dump(2) << '\n';
        if (!report.passed) {
            err << "verify: failed checks:";
            for (const auto& f : report.failed) err << ' ' << f;
            err << '\n';
            return kExitVerifyFailed;
        }
        return kExitOk;
    } catch (const PicardError& e) {
        err << e.what() << '\n';
        return kExitNoConvergence;
    } catch (const ModelError& e) {
        err << e.what() << '\n';
        return kExitConfig;
    }
}

int cmd_compare_oracle(const std::string& config_path, std::size_t steps, const std::string& out_dir,
                       std::ostream& out, std::ostream& err) {
    RunConfig config;
    try {
        config = load_config(config_path);
    } catch (const ConfigError& e) {
        err << e.what() << '\n';
        return kExitConfig;
    }
    try {
        MonteCarloSettings mc;
        mc.N = config.N;
        mc.seed = config.seed;
        mc.degree = config.degree;
        mc.antithetic = config.antithetic;
        mc.workers = config.workers;
        PicardOptions lattice_opt = picard_options(config);
        lattice_opt.tol = 1e-12;
        const OracleComparison cmp = oracle_compare(config.scenario, steps, mc, lattice_opt, picard_options(config));

        const double lattice_budget = 1e-10;
        const double mc_budget = config.eps_constraint.value_or(1e-2);
        const bool ok = cmp.lattice_mean_y <= lattice_budget && cmp.lattice_k <= lattice_budget &&
                        cmp.lattice_flatness <= lattice_budget && cmp.regression_k <= mc_budget &&
                        cmp.regression_mean_y <= mc_budget;

        const std::string dir = out_dir.empty() ? (config.output.empty() ? "." : config.output) : out_dir;
        std::filesystem::create_directories(dir);
        const TimeGrid grid = make_grid(config.scenario.T, steps);
        std::ostringstream csv;
        csv << "t,exact_mean_Y,lattice_mean_Y,regression_mean_Y,exact_K,lattice_K,regression_K\n";
        for (std::size_t i = 0; i <= steps; ++i)
            csv << fmt(grid.t(i)) << ',' << fmt(cmp.exact_mean_y[i]) << ',' << fmt(cmp.lattice_mean_y_path[i]) << ','
                << fmt(cmp.regression_mean_y_path[i]) << ',' << fmt(cmp.exact_k[i]) << ','
                << fmt(cmp.lattice_k_path[i]) << ',' << fmt(cmp.regression_k_path[i]) << '\n';
        write_file(std::filesystem::path(dir) / "oracle_comparison.csv", csv.str());

        json j = {{"steps", steps},
                  {"lattice", {{"mean_Y", cmp.lattice_mean_y}, {"K", cmp.lattice_k}, {"flatness", cmp.lattice_flatness},
                               {"budget", lattice_budget}}},
                  {"regression", {{"mean_Y", cmp.regression_mean_y}, {"K", cmp.regression_k},
                                  {"flatness", cmp.regression_flatness}, {"budget", mc_budget}}},
                  {"passed", ok},
                  {"scenario_hash", scenario_hash(config.scenario)}};
        out << j.dump(2) << '\n';
        return ok ? kExitOk : kExitVerifyFailed;
    } catch (const PicardError& e) {
        err << e.what() << '\n';
        return kExitNoConvergence;
    } catch (const ModelError& e) {
        err << e.what() << '\n';
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << e.what() << '\n';
        return kExitConfig;
    }
}

}  // namespace mfbsde
