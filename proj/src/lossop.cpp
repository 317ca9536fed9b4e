#include "mfbsde/lossop.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "mfbsde/parallel.hpp"

namespace mfbsde {

EmpiricalLaw EmpiricalLaw::uniform(std::span<const double> atoms) {
    if (atoms.empty()) throw ModelError("lossop: empty law");
    return EmpiricalLaw{atoms, {}};
}

EmpiricalLaw EmpiricalLaw::weighted(std::span<const double> atoms, std::span<const double> weights) {
    if (atoms.empty() || atoms.size() != weights.size())
        throw ModelError("lossop: atoms and weights must be nonempty and of equal length");
    double s = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw ModelError("lossop: negative weight");
        s += w;
    }
    if (std::abs(s - 1.0) > 1e-12) throw ModelError("lossop: weights do not sum to one");
    return EmpiricalLaw{atoms, weights};
}

namespace {

template <typename F>
double law_expectation(const EmpiricalLaw& law, F&& fn) {
    const std::size_t n = law.size();
    std::vector<double> terms(n);
    if (law.weights.empty()) {
        for (std::size_t j = 0; j < n; ++j) terms[j] = fn(law.atoms[j]);
        return tree_sum(terms) / static_cast<double>(n);
    }
    for (std::size_t j = 0; j < n; ++j) terms[j] = law.weights[j] * fn(law.atoms[j]);
    return tree_sum(terms);
}

}  // namespace

double EmpiricalLaw::mean() const {
    return law_expectation(*this, [](double a) { return a; });
}

double expected_loss(const LossSpec& loss, double t, const EmpiricalLaw& law, double x) {
    return law_expectation(law, [&](double a) { return loss(t, x + a); });
}

double loss_operator(const LossSpec& loss, double t, const EmpiricalLaw& law, double tol, double bracket_cap) {
    if (!(tol > 0.0)) throw ModelError("lossop: tolerance must be positive");
    // The linear family has E[l(t, x + X)] = x + E[X] - c(t); evaluating it in
    // closed form keeps the bisection cheap on large ensembles.
    std::function<double(double)> eval;
    if (loss.kind == LossKind::linear_shift) {
        const double base = law.mean() - loss.shift(t);
        eval = [base](double x) { return x + base; };
    } else {
        eval = [&](double x) { return expected_loss(loss, t, law, x); };
    }
    if (eval(0.0) >= 0.0) return 0.0;
    double lo = 0.0, hi = 1.0;
    while (eval(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > bracket_cap)
            throw ModelError("lossop: bracket expansion exceeded cap; loss is not positive at infinity");
    }
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (eval(mid) >= 0.0)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

double hl_lipschitz_probe(const LossSpec& loss, double t,
                          const std::vector<std::pair<EmpiricalLaw, EmpiricalLaw>>& pairs, double tol) {
    const double C = hl_constant(loss);
    double worst = 0.0;
    for (const auto& [x, y] : pairs) {
        if (x.size() != y.size()) throw ModelError("lossop: coupled laws must have equal atom counts");
        std::vector<double> gaps(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) gaps[j] = x.weight(j) * std::abs(x.atoms[j] - y.atoms[j]);
        const double mean_gap = tree_sum(gaps);
        const double dl = std::abs(loss_operator(loss, t, x, tol) - loss_operator(loss, t, y, tol));
        const double excess = std::max(0.0, dl - 2.0 * tol);
        if (excess == 0.0) continue;
        worst = std::max(worst, mean_gap > 0.0 ? excess / (C * mean_gap) : std::numeric_limits<double>::infinity());
    }
    return worst;
}

}  // namespace mfbsde
