#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfbsde {

/// Raised for problem instances that are inconsistent or violate a standing
/// assumption in a way the solver cannot work around.
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class GeneratorMode { lipschitz, quadratic };

std::string to_string(GeneratorMode mode);
GeneratorMode parse_mode(const std::string& text);

// ---------------------------------------------------------------------------
// Running loss l(t, y)

enum class LossKind { linear_shift, sine_perturbed };

/// Deterministic running loss. Both families act on u = y - c(t) with the
/// shift c(t) = level + amplitude * sin(pi * t / period):
///   linear_shift:   l = u
///   sine_perturbed: l = u + beta * sin(u),  0 < beta < 1
struct LossSpec {
    LossKind kind = LossKind::linear_shift;
    double level = 0.0;
    double amplitude = 0.0;
    double period = 1.0;
    double beta = 0.0;
    double c_growth = 1.0;  ///< |l(t,y)| <= c_growth * (1 + |y|)
    double c_lip = 1.0;     ///< lower bi-Lipschitz constant
    double C_lip = 1.0;     ///< upper bi-Lipschitz constant

    static LossSpec linear_shift(double level, double amplitude = 0.0, double period = 1.0);
    static LossSpec sine_perturbed(double beta, double level = 0.0, double amplitude = 0.0,
                                   double period = 1.0);

    double shift(double t) const;
    double operator()(double t, double y) const;
    /// l(t, y) > 0 for every t and every y >= this threshold.
    double positivity_threshold() const;
};

/// Constant of the Lipschitz property of the loss operator: C_lip / c_lip.
double hl_constant(const LossSpec& loss);

// ---------------------------------------------------------------------------
// Driver f(t, y, ybar, z, zbar, k)

enum class DriverKind { affine, quadratic_capped };

/// Generator family.
///
/// affine:            f = c + a_y y + a_ybar ybar + <b_z, z> + <b_zbar, zbar> + a_k k
/// quadratic_capped:  affine part + (gamma / 2) min(|z|^2, z_cap) + eta |zbar|
///
/// `lambda` is the declared constant of the Lipschitz (or quadratic growth)
/// condition; `validate_assumptions` probes it rather than trusting it.
struct DriverSpec {
    DriverKind kind = DriverKind::affine;
    GeneratorMode mode = GeneratorMode::lipschitz;
    double lambda = 1.0;
    double alpha = 0.0;    ///< subquadratic exponent in E[z] (quadratic mode)
    double l_bound = 0.0;  ///< bound on |f(t,0,0,0,0,0)| (quadratic mode)

    double constant = 0.0;
    double a_y = 0.0;
    double a_ybar = 0.0;
    double a_k = 0.0;
    std::vector<double> b_z;     ///< empty means zero
    std::vector<double> b_zbar;  ///< empty means zero
    double gamma = 0.0;
    double z_cap = 1e3;
    double eta = 0.0;

    double operator()(double t, double y, double ybar, std::span<const double> z,
                      std::span<const double> zbar, double k) const;

    bool depends_on_y() const { return a_y != 0.0; }
    bool depends_on_k() const { return a_k != 0.0; }
    bool has_quadratic_term() const { return kind == DriverKind::quadratic_capped && gamma != 0.0; }
    /// Smallest lambda for which the declared growth condition holds.
    double natural_lambda() const;
};

// ---------------------------------------------------------------------------
// Resistance G_t(k)

enum class ResistanceKind { zero, evaluation, running_sup, scaled_integral };

/// Adapted functional of a deterministic path sampled on a uniform grid.
struct ResistanceSpec {
    ResistanceKind kind = ResistanceKind::zero;
    double horizon = 1.0;  ///< scaled_integral divides by max(horizon, 1)

    /// G at node `i` of a path sampled with spacing `dt`.
    double at(std::span<const double> path, std::size_t i, double dt) const;
    /// G at every node of the path.
    std::vector<double> apply(std::span<const double> path, double dt) const;
};

// ---------------------------------------------------------------------------
// Terminal condition xi = g(B_T)

enum class TerminalKind { affine, tanh };

/// affine: shift + scale * sum_j B_T^j
/// tanh:   shift + scale * tanh(sum_j B_T^j)
struct TerminalSpec {
    TerminalKind kind = TerminalKind::affine;
    double scale = 1.0;
    double shift = 0.0;

    double operator()(std::span<const double> terminal_state) const;
    /// Essential bound of |xi|; infinite for unbounded families.
    double bound() const;
};

// ---------------------------------------------------------------------------

struct ScenarioSpec {
    std::string name;
    TerminalSpec terminal;
    DriverSpec driver;
    ResistanceSpec resistance;
    LossSpec loss;
    double T = 1.0;
    int d = 1;
    /// Scenario declares |f(t, y, ybar, 0, zbar)| <= L (uniform-bound hypothesis).
    bool bounded_at_zero_z = false;

    GeneratorMode mode() const { return driver.mode; }
    /// Constant C used by the horizon formulas: the loss-operator constant.
    double C() const { return hl_constant(loss); }
    /// Common bound L of the terminal condition and f(t,0,...,0).
    double L() const;

    /// Throws ModelError when mode flags, dimensions or horizon are inconsistent.
    void check() const;
};

// ---------------------------------------------------------------------------

struct AssumptionCheck {
    std::string name;
    double worst_ratio = 0.0;
    bool passed = true;
    std::string detail;
};

struct ValidationReport {
    std::size_t probes = 0;
    std::uint64_t seed = 0;
    std::vector<AssumptionCheck> checks;
    double min_slope = std::numeric_limits<double>::infinity();
    double max_slope = 0.0;

    bool passed() const;
    const AssumptionCheck* find(const std::string& name) const;
};

inline constexpr double kAssumptionSlack = 1e-9;

/// Randomized probes of the standing assumptions. A check passes when its
/// worst observed ratio (observed / allowed) is at most 1 + 1e-9.
ValidationReport validate_assumptions(const ScenarioSpec& spec, std::size_t probes,
                                      std::uint64_t seed);

}  // namespace mfbsde
