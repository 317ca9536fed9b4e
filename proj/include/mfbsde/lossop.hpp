#pragma once

#include <span>
#include <utility>
#include <vector>

#include "mfbsde/model.hpp"

namespace mfbsde {

/// Finite-support law: atoms with weights (uniform when `weights` is empty).
/// Non-owning; the referenced storage must outlive the view.
struct EmpiricalLaw {
    std::span<const double> atoms;
    std::span<const double> weights;

    static EmpiricalLaw uniform(std::span<const double> atoms);
    /// Throws ModelError unless weights are nonnegative and sum to 1 within 1e-12.
    static EmpiricalLaw weighted(std::span<const double> atoms, std::span<const double> weights);

    std::size_t size() const { return atoms.size(); }
    double weight(std::size_t j) const {
        return weights.empty() ? 1.0 / static_cast<double>(atoms.size()) : weights[j];
    }
    double mean() const;
};

inline constexpr double kLossTolerance = 1e-10;
inline constexpr double kBracketCap = 1152921504606846976.0;  // 2^60

/// E[l(t, x + X)] under the law.
double expected_loss(const LossSpec& loss, double t, const EmpiricalLaw& law, double x);

/// inf{x >= 0 : E[l(t, x + X)] >= 0}, by doubling then bisection. The returned
/// point satisfies the constraint and lies within `tol` above the infimum.
double loss_operator(const LossSpec& loss, double t, const EmpiricalLaw& law, double tol = kLossTolerance,
                     double bracket_cap = kBracketCap);

/// Worst ratio |L_t(X) - L_t(Y)| / (C E|X - Y|) over index-coupled pairs, with
/// C = hl_constant(loss). Twice the bisection tolerance is discounted from the
/// numerator.
double hl_lipschitz_probe(const LossSpec& loss, double t,
                          const std::vector<std::pair<EmpiricalLaw, EmpiricalLaw>>& pairs,
                          double tol = kLossTolerance);

}  // namespace mfbsde
