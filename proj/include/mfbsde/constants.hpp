#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mfbsde/model.hpp"

namespace mfbsde {

// Horizon and bound constants of the contraction argument. Each function
// evaluates its closed-form expression directly; the inputs are the loss
// constant C, the common bound L, the generator constant lambda, the
// subquadratic exponent alpha, the horizon T and the ball radius A.

/// Contraction horizon, Lipschitz generators:
/// min(sqrt(1 / (40 (38 + 10 C^2) lambda^2)), 1 / (40 (38 + 10 C^2) lambda^2)).
template <typename Scalar>
Scalar delta_lipschitz(Scalar C, Scalar lambda) {
    using std::sqrt;
    if (!(lambda > Scalar(0))) throw ModelError("picard: lambda must be positive");
    if (C < Scalar(0)) throw ModelError("picard: C must be nonnegative");
    const Scalar inv = Scalar(1) / (Scalar(40) * (Scalar(38) + Scalar(10) * C * C) * lambda * lambda);
    return std::min(sqrt(inv), inv);
}

/// Smallest admissible ball radius, quadratic generators:
/// (4 + 3C) L + (1 + C lambda)(1 + 3L / lambda) e^{9 lambda L}.
template <typename Scalar>
Scalar a_tilde_0(Scalar C, Scalar L, Scalar lambda) {
    using std::exp;
    if (!(lambda > Scalar(0)) || L < Scalar(0) || C < Scalar(0))
        throw ModelError("picard: a_tilde_0 needs lambda > 0 and C, L >= 0");
    return (Scalar(4) + Scalar(3) * C) * L +
           (Scalar(1) + C * lambda) * (Scalar(1) + Scalar(3) * L / lambda) * exp(Scalar(9) * lambda * L);
}

/// Horizon keeping the solution map inside the ball of radius A:
/// min(L / (9 lambda A), L^2 / (9 lambda^2 A^2), (L / (3 lambda A^{1+alpha}))^{2/(1-alpha)}).
template <typename Scalar>
Scalar delta_q(Scalar A, Scalar L, Scalar lambda, Scalar alpha) {
    using std::pow;
    if (!(alpha >= Scalar(0) && alpha < Scalar(1))) throw ModelError("picard: alpha must lie in [0, 1)");
    if (!(A > Scalar(0)) || !(L > Scalar(0)) || !(lambda > Scalar(0)))
        throw ModelError("picard: delta_q needs positive A, L, lambda");
    const Scalar first = L / (Scalar(9) * lambda * A);
    const Scalar second = (L * L) / (Scalar(9) * lambda * lambda * A * A);
    const Scalar third = pow(L / (Scalar(3) * lambda * pow(A, Scalar(1) + alpha)), Scalar(2) / (Scalar(1) - alpha));
    return std::min({first, second, third});
}

/// 4 + 3C + 2 sqrt(1 + 12 lambda^2 + 24 lambda^2 A^2) (1 + (1 + 3C) lambda sqrt(3 + 6 A^2)).
template <typename Scalar>
Scalar a_hat(Scalar C, Scalar lambda, Scalar A) {
    using std::sqrt;
    const Scalar l2 = lambda * lambda;
    return Scalar(4) + Scalar(3) * C +
           Scalar(2) * sqrt(Scalar(1) + Scalar(12) * l2 + Scalar(24) * l2 * A * A) *
               (Scalar(1) + (Scalar(1) + Scalar(3) * C) * lambda * sqrt(Scalar(3) + Scalar(6) * A * A));
}

/// How the third term of the contraction horizon is read. As printed the term
/// is (A_hat^2 lambda^2 / (24 A^{2 alpha}))^{1/(1-alpha)}, which grows with
/// A_hat; the reciprocal reading (1 / (24 A^{2 alpha} A_hat^2 lambda^2))^{1/(1-alpha)}
/// is the one that bounds a horizon.
enum class DeltaHatReading { reciprocal, literal };

template <typename Scalar>
struct DeltaHat {
    Scalar value;          ///< min with the selected reading
    Scalar literal_term;   ///< third argument, literal reading
    Scalar reciprocal_term;
    Scalar literal_value;  ///< min with the literal reading
    Scalar reciprocal_value;
};

template <typename Scalar>
DeltaHat<Scalar> delta_hat_terms(Scalar A, Scalar C, Scalar L, Scalar lambda, Scalar alpha,
                                 DeltaHatReading reading = DeltaHatReading::reciprocal) {
    using std::pow;
    const Scalar dq = delta_q(A, L, lambda, alpha);
    const Scalar ah = a_hat(C, lambda, A);
    const Scalar expo = Scalar(1) / (Scalar(1) - alpha);
    const Scalar a2a = pow(A, Scalar(2) * alpha);
    const Scalar first = Scalar(1) / (Scalar(4) * ah * lambda);
    const Scalar second = Scalar(1) / (Scalar(12) * ah * ah * lambda * lambda);
    DeltaHat<Scalar> out{};
    out.literal_term = pow(ah * ah * lambda * lambda / (Scalar(24) * a2a), expo);
    out.reciprocal_term = pow(Scalar(1) / (Scalar(24) * a2a * ah * ah * lambda * lambda), expo);
    out.literal_value = std::min({first, second, out.literal_term, dq});
    out.reciprocal_value = std::min({first, second, out.reciprocal_term, dq});
    out.value = reading == DeltaHatReading::reciprocal ? out.reciprocal_value : out.literal_value;
    return out;
}

template <typename Scalar>
Scalar delta_hat(Scalar A, Scalar C, Scalar L, Scalar lambda, Scalar alpha,
                 DeltaHatReading reading = DeltaHatReading::reciprocal) {
    return delta_hat_terms(A, C, L, lambda, alpha, reading).value;
}

template <typename Scalar>
struct UniformBound {
    Scalar l_bar_1;  ///< L (T + 1) e^{lambda T}
    Scalar l_bar_2;  ///< ((1 v T) / 3)(1 + 4L / lambda + 2 l_bar_1) e^{3 lambda l_bar_1}
    Scalar l_bar;    ///< l_bar_1 + (C + 1) L + C (L + lambda / 2) T + (3/2) C l_bar_2
};

template <typename Scalar>
UniformBound<Scalar> l_bar(Scalar C, Scalar L, Scalar lambda, Scalar T) {
    using std::exp;
    if (!(lambda > Scalar(0)) || !(T > Scalar(0))) throw ModelError("picard: l_bar needs lambda > 0 and T > 0");
    UniformBound<Scalar> b{};
    b.l_bar_1 = L * (T + Scalar(1)) * exp(lambda * T);
    b.l_bar_2 = (std::max(Scalar(1), T) / Scalar(3)) * (Scalar(1) + Scalar(4) * L / lambda + Scalar(2) * b.l_bar_1) *
                exp(Scalar(3) * lambda * b.l_bar_1);
    // C = 0 removes the l_bar_2 contribution even when it overflows.
    const Scalar tail = C == Scalar(0) ? Scalar(0) : Scalar(1.5) * C * b.l_bar_2;
    b.l_bar = b.l_bar_1 + (C + Scalar(1)) * L + C * (L + Scalar(0.5) * lambda) * T + tail;
    return b;
}

/// All constants for one parameter set.
struct ConstantsReport {
    double C = 0.0, L = 0.0, lambda = 0.0, alpha = 0.0, T = 0.0;
    double a_tilde = 0.0;  ///< ball radius used (defaults to a_tilde_0)
    double delta_lip = 0.0;
    double a_tilde_0 = 0.0;
    double delta_q = 0.0;
    double a_hat = 0.0;
    double delta_hat = 0.0;  ///< reciprocal reading
    double delta_hat_literal = 0.0;
    double delta_hat_third_reciprocal = 0.0;
    double delta_hat_third_literal = 0.0;
    double l_bar_1 = 0.0, l_bar_2 = 0.0, l_bar = 0.0;
    /// max over grid nodes of L_t(0); filled when built from a scenario.
    double l_t_zero_max = 0.0;
    bool has_l_t_zero = false;
};

/// Quadratic-mode quantities need L > 0; with L = 0 they are left at zero.
inline ConstantsReport compute_constants(double C, double L, double lambda, double alpha, double T,
                                         double a_tilde = 0.0) {
    ConstantsReport r;
    r.C = C;
    r.L = L;
    r.lambda = lambda;
    r.alpha = alpha;
    r.T = T;
    r.delta_lip = delta_lipschitz(C, lambda);
    if (L > 0.0) {
        r.a_tilde_0 = mfbsde::a_tilde_0(C, L, lambda);
        r.a_tilde = a_tilde > 0.0 ? a_tilde : r.a_tilde_0;
        r.delta_q = mfbsde::delta_q(r.a_tilde, L, lambda, alpha);
        r.a_hat = mfbsde::a_hat(C, lambda, r.a_tilde);
        const auto dh = delta_hat_terms(r.a_tilde, C, L, lambda, alpha);
        r.delta_hat = dh.reciprocal_value;
        r.delta_hat_literal = dh.literal_value;
        r.delta_hat_third_reciprocal = dh.reciprocal_term;
        r.delta_hat_third_literal = dh.literal_term;
    }
    if (T > 0.0) {
        const auto b = mfbsde::l_bar(C, L, lambda, T);
        r.l_bar_1 = b.l_bar_1;
        r.l_bar_2 = b.l_bar_2;
        r.l_bar = b.l_bar;
    }
    return r;
}

}  // namespace mfbsde
