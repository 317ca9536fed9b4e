#include "mfbsde/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace mfbsde {

std::string to_string(GeneratorMode mode) {
    return mode == GeneratorMode::lipschitz ? "lipschitz" : "quadratic";
}

GeneratorMode parse_mode(const std::string& text) {
    if (text == "lipschitz") return GeneratorMode::lipschitz;
    if (text == "quadratic") return GeneratorMode::quadratic;
    throw ModelError("model: unknown generator mode '" + text + "'");
}

// ---------------------------------------------------------------------------

LossSpec LossSpec::linear_shift(double level, double amplitude, double period) {
    LossSpec loss;
    loss.kind = LossKind::linear_shift;
    loss.level = level;
    loss.amplitude = amplitude;
    loss.period = period;
    loss.c_growth = std::max(1.0, std::abs(level) + std::abs(amplitude));
    loss.c_lip = 1.0;
    loss.C_lip = 1.0;
    return loss;
}

LossSpec LossSpec::sine_perturbed(double beta, double level, double amplitude, double period) {
    if (!(beta > 0.0 && beta < 1.0))
        throw ModelError("model: sine_perturbed loss needs 0 < beta < 1");
    LossSpec loss;
    loss.kind = LossKind::sine_perturbed;
    loss.beta = beta;
    loss.level = level;
    loss.amplitude = amplitude;
    loss.period = period;
    // |u + beta sin u| <= |y| + |c| + beta
    loss.c_growth = std::max(1.0, std::abs(level) + std::abs(amplitude) + beta);
    loss.c_lip = 1.0 - beta;
    loss.C_lip = 1.0 + beta;
    return loss;
}

double LossSpec::shift(double t) const {
    if (amplitude == 0.0) return level;
    return level + amplitude * std::sin(std::numbers::pi * t / period);
}

double LossSpec::operator()(double t, double y) const {
    const double u = y - shift(t);
    switch (kind) {
    case LossKind::linear_shift:
        return u;
    case LossKind::sine_perturbed:
        return u + beta * std::sin(u);
    }
    return u;
}

double LossSpec::positivity_threshold() const {
    const double max_shift = std::abs(level) + std::abs(amplitude);
    switch (kind) {
    case LossKind::linear_shift:
        return max_shift + 1.0;
    case LossKind::sine_perturbed:
        return max_shift + beta + 1.0;
    }
    return max_shift + 1.0;
}

double hl_constant(const LossSpec& loss) {
    if (!(loss.c_lip > 0.0)) throw ModelError("model: loss lower Lipschitz constant must be positive");
    if (loss.C_lip < loss.c_lip) throw ModelError("model: loss constants must satisfy c_lip <= C_lip");
    return loss.C_lip / loss.c_lip;
}

// ---------------------------------------------------------------------------

double DriverSpec::operator()(double /*t*/, double y, double ybar, std::span<const double> z,
                              std::span<const double> zbar, double k) const {
    double value = constant + a_y * y + a_ybar * ybar + a_k * k;
    for (std::size_t j = 0; j < b_z.size() && j < z.size(); ++j) value += b_z[j] * z[j];
    for (std::size_t j = 0; j < b_zbar.size() && j < zbar.size(); ++j) value += b_zbar[j] * zbar[j];
    if (kind == DriverKind::quadratic_capped) {
        double z2 = 0.0;
        for (double v : z) z2 += v * v;
        double zbar_norm = 0.0;
        for (double v : zbar) zbar_norm += v * v;
        value += 0.5 * gamma * std::min(z2, z_cap) + eta * std::sqrt(zbar_norm);
    }
    return value;
}

namespace {
double euclid(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}
}  // namespace

double DriverSpec::natural_lambda() const {
    double lam = std::max({std::abs(a_y), std::abs(a_ybar), std::abs(a_k), euclid(b_z), euclid(b_zbar)});
    if (kind == DriverKind::quadratic_capped) {
        // (gamma/2)|min(|z|^2,cap) - min(|q|^2,cap)| <= (gamma/2)(|z|+|q|)|z-q|
        // and <b_z, z-q> + eta(|zbar|-|qbar|) fold into the (1 + ...) factors
        lam = std::max({std::abs(a_y), std::abs(a_ybar), std::abs(a_k),
                        euclid(b_z) + 0.5 * std::abs(gamma), euclid(b_zbar) + std::abs(eta)});
    }
    return lam;
}

// ---------------------------------------------------------------------------

double ResistanceSpec::at(std::span<const double> path, std::size_t i, double dt) const {
    switch (kind) {
    case ResistanceKind::zero:
        return 0.0;
    case ResistanceKind::evaluation:
        return path[i];
    case ResistanceKind::running_sup: {
        double m = 0.0;
        for (std::size_t j = 0; j <= i; ++j) m = std::max(m, std::abs(path[j]));
        return m;
    }
    case ResistanceKind::scaled_integral: {
        double s = 0.0;
        for (std::size_t j = 0; j < i; ++j) s += path[j] * dt;
        return s / std::max(horizon, 1.0);
    }
    }
    return 0.0;
}

std::vector<double> ResistanceSpec::apply(std::span<const double> path, double dt) const {
    std::vector<double> out(path.size(), 0.0);
    for (std::size_t i = 0; i < path.size(); ++i) out[i] = at(path, i, dt);
    return out;
}

// ---------------------------------------------------------------------------

double TerminalSpec::operator()(std::span<const double> terminal_state) const {
    double s = 0.0;
    for (double b : terminal_state) s += b;
    switch (kind) {
    case TerminalKind::affine:
        return shift + scale * s;
    case TerminalKind::tanh:
        return shift + scale * std::tanh(s);
    }
    return shift;
}

double TerminalSpec::bound() const {
    switch (kind) {
    case TerminalKind::affine:
        return scale == 0.0 ? std::abs(shift) : std::numeric_limits<double>::infinity();
    case TerminalKind::tanh:
        return std::abs(shift) + std::abs(scale);
    }
    return std::numeric_limits<double>::infinity();
}

double ScenarioSpec::L() const {
    return std::max(terminal.bound(), driver.l_bound);
}

void ScenarioSpec::check() const {
    if (!(T > 0.0)) throw ModelError("model: horizon T must be positive");
    if (d < 1) throw ModelError("model: Brownian dimension must be at least 1");
    if (!(driver.lambda > 0.0)) throw ModelError("model: driver lambda must be positive");
    if (driver.has_quadratic_term() && driver.mode == GeneratorMode::lipschitz)
        throw ModelError("model: driver has a |z|^2 term but is declared lipschitz");
    if (driver.mode == GeneratorMode::quadratic) {
        if (!(driver.alpha >= 0.0 && driver.alpha < 1.0))
            throw ModelError("model: quadratic mode needs alpha in [0, 1)");
        if (!std::isfinite(terminal.bound()))
            throw ModelError("model: quadratic mode needs a bounded terminal condition");
    }
    if (!driver.b_z.empty() && static_cast<int>(driver.b_z.size()) != d)
        throw ModelError("model: driver b_z has wrong dimension");
    if (!driver.b_zbar.empty() && static_cast<int>(driver.b_zbar.size()) != d)
        throw ModelError("model: driver b_zbar has wrong dimension");
    hl_constant(loss);
}

// ---------------------------------------------------------------------------

bool ValidationReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const AssumptionCheck& c) { return c.passed; });
}

const AssumptionCheck* ValidationReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

namespace {

struct Prober {
    std::mt19937_64 rng;
    std::uniform_real_distribution<double> unit{0.0, 1.0};
    std::normal_distribution<double> gauss{0.0, 1.0};

    explicit Prober(std::uint64_t seed) : rng(seed) {}

    /// Magnitudes spread over several decades so both small and saturated
    /// regimes get probed.
    double value() {
        const double scale = std::pow(10.0, -2.0 + 4.0 * unit(rng));
        return scale * gauss(rng);
    }
    double time(double T) { return T * unit(rng); }
    std::vector<double> vec(int d) {
        std::vector<double> v(static_cast<std::size_t>(d));
        for (auto& x : v) x = value();
        return v;
    }
};

double diff_norm(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(s);
}

double norm(const std::vector<double>& a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

void finish(AssumptionCheck& c) { c.passed = c.worst_ratio <= 1.0 + kAssumptionSlack; }

double ratio(double observed, double allowed) {
    if (observed == 0.0) return 0.0;
    if (allowed <= 0.0) return std::numeric_limits<double>::infinity();
    return observed / allowed;
}

AssumptionCheck probe_driver(const ScenarioSpec& spec, std::size_t probes, Prober& pr) {
    const auto& f = spec.driver;
    AssumptionCheck c;
    c.name = spec.mode() == GeneratorMode::lipschitz ? "H_f" : "Hq_f";
    for (std::size_t p = 0; p < probes; ++p) {
        const double t = pr.time(spec.T);
        const double y = pr.value(), ybar = pr.value(), k = pr.value();
        const double py = pr.value(), pybar = pr.value(), pk = pr.value();
        auto z = pr.vec(spec.d), zbar = pr.vec(spec.d), q = pr.vec(spec.d), qbar = pr.vec(spec.d);
        // Half the probes use nearby pairs so local slopes are seen.
        if (p % 2 == 1) {
            for (int j = 0; j < spec.d; ++j) {
                q[j] = z[j] + 1e-3 * pr.gauss(pr.rng);
                qbar[j] = zbar[j] + 1e-3 * pr.gauss(pr.rng);
            }
        }
        const double lhs = std::abs(f(t, y, ybar, z, zbar, k) - f(t, py, pybar, q, qbar, pk));
        double rhs = 0.0;
        if (spec.mode() == GeneratorMode::lipschitz) {
            rhs = f.lambda * (std::abs(y - py) + std::abs(ybar - pybar) + diff_norm(z, q) +
                              diff_norm(zbar, qbar) + std::abs(k - pk));
        } else {
            const double a = f.alpha;
            rhs = f.lambda * (std::abs(y - py) + std::abs(ybar - pybar) +
                              (1.0 + norm(z) + norm(q)) * diff_norm(z, q) +
                              (1.0 + std::pow(norm(zbar), a) + std::pow(norm(qbar), a)) * diff_norm(zbar, qbar) +
                              std::abs(k - pk));
        }
        c.worst_ratio = std::max(c.worst_ratio, ratio(lhs, rhs));
    }
    finish(c);
    return c;
}

AssumptionCheck probe_driver_origin(const ScenarioSpec& spec, std::size_t probes, Prober& pr) {
    AssumptionCheck c;
    c.name = "Hq_f_origin";
    const std::vector<double> zero(static_cast<std::size_t>(spec.d), 0.0);
    for (std::size_t p = 0; p < probes; ++p) {
        const double t = pr.time(spec.T);
        const double f0 = std::abs(spec.driver(t, 0.0, 0.0, zero, zero, 0.0));
        c.worst_ratio = std::max(c.worst_ratio, ratio(f0, spec.driver.l_bound));
    }
    finish(c);
    return c;
}

std::vector<AssumptionCheck> probe_resistance(const ScenarioSpec& spec, std::size_t probes, Prober& pr) {
    constexpr std::size_t nodes = 17;
    const double dt = spec.T / static_cast<double>(nodes - 1);
    AssumptionCheck zero{"H_G_zero", 0.0, true, {}}, adapted{"H_G_adapted", 0.0, true, {}}, lip{"H_G_lipschitz", 0.0, true, {}};
    const std::vector<double> null_path(nodes, 0.0);
    for (std::size_t p = 0; p < probes; ++p) {
        std::vector<double> a(nodes), b(nodes);
        for (std::size_t i = 0; i < nodes; ++i) {
            a[i] = pr.value();
            b[i] = (p % 3 == 0) ? a[i] + 0.5 : pr.value();
        }
        const std::size_t i = static_cast<std::size_t>(pr.unit(pr.rng) * nodes) % nodes;
        zero.worst_ratio = std::max(zero.worst_ratio,
                                    std::abs(spec.resistance.at(null_path, i, dt)) > 0.0 ? 2.0 : 0.0);
        double sup = 0.0;
        for (std::size_t j = 0; j <= i; ++j) sup = std::max(sup, std::abs(a[j] - b[j]));
        const double ga = spec.resistance.at(a, i, dt);
        lip.worst_ratio = std::max(lip.worst_ratio, ratio(std::abs(ga - spec.resistance.at(b, i, dt)), sup));
        auto perturbed = a;
        for (std::size_t j = i + 1; j < nodes; ++j) perturbed[j] += 1.0 + pr.value();
        adapted.worst_ratio = std::max(adapted.worst_ratio,
                                       spec.resistance.at(perturbed, i, dt) != ga ? 2.0 : 0.0);
    }
    finish(zero);
    finish(adapted);
    finish(lip);
    return {zero, adapted, lip};
}

std::vector<AssumptionCheck> probe_loss(const ScenarioSpec& spec, std::size_t probes, Prober& pr,
                                        ValidationReport& report) {
    const auto& l = spec.loss;
    AssumptionCheck mono{"H_l_increasing", 0.0, true, {}}, growth{"H_l_growth", 0.0, true, {}}, upper{"H_l_bilipschitz_upper", 0.0, true, {}},
        lower{"H_l_bilipschitz_lower", 0.0, true, {}}, positive{"H_l_positive_at_infinity", 0.0, true, {}};
    const double ystar = l.positivity_threshold();
    for (std::size_t p = 0; p < probes; ++p) {
        const double t = pr.time(spec.T);
        double y1 = pr.value();
        double y2 = (p % 2 == 0) ? pr.value() : y1 + 1e-3 * (0.1 + pr.unit(pr.rng));
        if (y1 == y2) continue;
        if (y2 < y1) std::swap(y1, y2);
        const double l1 = l(t, y1), l2 = l(t, y2);
        mono.worst_ratio = std::max(mono.worst_ratio, l2 > l1 ? 0.0 : 2.0);
        growth.worst_ratio = std::max(growth.worst_ratio, ratio(std::abs(l1), l.c_growth * (1.0 + std::abs(y1))));
        const double dl = std::abs(l2 - l1), dy = y2 - y1;
        upper.worst_ratio = std::max(upper.worst_ratio, ratio(dl, l.C_lip * dy));
        lower.worst_ratio = std::max(lower.worst_ratio, ratio(l.c_lip * dy, dl));
        report.min_slope = std::min(report.min_slope, dl / dy);
        report.max_slope = std::max(report.max_slope, dl / dy);
        positive.worst_ratio = std::max(positive.worst_ratio, l(t, ystar + std::abs(pr.value())) > 0.0 ? 0.0 : 2.0);
    }
    for (auto* c : {&mono, &growth, &upper, &lower, &positive}) finish(*c);
    std::ostringstream os;
    os << "observed slope range [" << report.min_slope << ", " << report.max_slope << "]";
    upper.detail = lower.detail = os.str();
    return {mono, growth, upper, lower, positive};
}

std::vector<AssumptionCheck> probe_terminal(const ScenarioSpec& spec, std::size_t probes, Prober& pr) {
    std::vector<AssumptionCheck> out;
    const double sd = std::sqrt(spec.T);
    if (spec.mode() == GeneratorMode::quadratic) {
        AssumptionCheck bounded{"Hq_xi_bounded", 0.0, true, {}};
        for (std::size_t p = 0; p < probes; ++p) {
            std::vector<double> b(static_cast<std::size_t>(spec.d));
            for (auto& x : b) x = (p % 2 == 0 ? 10.0 : 1.0) * sd * pr.gauss(pr.rng);
            bounded.worst_ratio = std::max(bounded.worst_ratio, ratio(std::abs(spec.terminal(b)), spec.L()));
        }
        finish(bounded);
        out.push_back(bounded);
    }
    // E[l(T, xi)] >= 0 on an antithetic sample, to within three standard errors
    // plus a round-off floor.
    AssumptionCheck mean_loss{"H_xi_expected_loss", 0.0, true, {}};
    const std::size_t pairs = std::max<std::size_t>(probes, 2);
    double s = 0.0, s2 = 0.0;
    for (std::size_t p = 0; p < pairs; ++p) {
        std::vector<double> b(static_cast<std::size_t>(spec.d)), nb(b.size());
        for (std::size_t j = 0; j < b.size(); ++j) {
            b[j] = sd * pr.gauss(pr.rng);
            nb[j] = -b[j];
        }
        const double v = 0.5 * (spec.loss(spec.T, spec.terminal(b)) + spec.loss(spec.T, spec.terminal(nb)));
        s += v;
        s2 += v * v;
    }
    const double n = static_cast<double>(pairs);
    const double mean = s / n;
    const double se = std::sqrt(std::max(0.0, s2 / n - mean * mean) / n);
    mean_loss.worst_ratio = mean >= 0.0 ? 0.0 : ratio(-mean, 3.0 * se + 1e-12);
    std::ostringstream os;
    os << "empirical E[l(T,xi)] = " << mean << " (se " << se << ")";
    mean_loss.detail = os.str();
    finish(mean_loss);
    out.push_back(mean_loss);
    return out;
}

}  // namespace

ValidationReport validate_assumptions(const ScenarioSpec& spec, std::size_t probes, std::uint64_t seed) {
    if (probes < 1) throw ModelError("model: validate_assumptions needs at least one probe");
    spec.check();
    ValidationReport report;
    report.probes = probes;
    report.seed = seed;
    Prober pr(seed);
    report.checks.push_back(probe_driver(spec, probes, pr));
    if (spec.mode() == GeneratorMode::quadratic) report.checks.push_back(probe_driver_origin(spec, probes, pr));
    for (auto& c : probe_resistance(spec, probes, pr)) report.checks.push_back(std::move(c));
    for (auto& c : probe_loss(spec, probes, pr, report)) report.checks.push_back(std::move(c));
    for (auto& c : probe_terminal(spec, probes, pr)) report.checks.push_back(std::move(c));
    return report;
}

}  // namespace mfbsde
