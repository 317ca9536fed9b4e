#include <doctest.h>

#include <cmath>

#include "mfbsde/constants.hpp"

using namespace mfbsde;

// Hand evaluations:
//   delta_lipschitz(1, 1): 40 (38 + 10) = 1920, min(sqrt(1/1920), 1/1920) = 1/1920
//   delta_lipschitz(3, 0.05): 40 * 128 * 0.0025 = 12.8, min(0.2795.., 0.078125) = 0.078125
//   a_tilde_0(1, 1, 1) = 7 + (1 + 1)(1 + 3) e^9 = 7 + 8 e^9
//   delta_q(10, 1, 1, 0) = min(1/90, 1/(9 * 100), (1/30)^2) = 1/900
//   a_hat(1, 1, 1) = 7 + 2 sqrt(37) (1 + 4 * 3) = 7 + 26 sqrt(37)
//   l_bar(0, 1, 1, 1): l_bar_1 = 2e, l_bar = 2e + 1
//   l_bar_2(0, 1, 1, 1) = (1/3)(1 + 4 + 4e) e^{6e}

TEST_CASE("delta_lipschitz") {
    CHECK(std::abs(delta_lipschitz(1.0, 1.0) - 1.0 / 1920.0) <= 1e-9);
    CHECK(std::abs(delta_lipschitz(3.0, 0.05) - 0.078125) <= 1e-9);
    CHECK(delta_lipschitz(2.0, 1.0) <= delta_lipschitz(1.0, 1.0));
    CHECK(delta_lipschitz(1.0, 2.0) <= delta_lipschitz(1.0, 1.0));
    CHECK_THROWS_AS(delta_lipschitz(1.0, 0.0), ModelError);
}

TEST_CASE("a_tilde_0") {
    const double expect = 7.0 + 8.0 * std::exp(9.0);
    CHECK(std::abs(a_tilde_0(1.0, 1.0, 1.0) - expect) <= 1e-9 * expect);
    CHECK(a_tilde_0(1.0, 1.0, 1.0) == doctest::Approx(64831.67).epsilon(1e-7));
    CHECK(a_tilde_0(2.0, 1e-12, 0.5) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("delta_q") {
    CHECK(std::abs(delta_q(10.0, 1.0, 1.0, 0.0) - 1.0 / 900.0) <= 1e-12);
    CHECK(delta_q(10.0, 1.0, 1.0, 0.0) == doctest::Approx(std::pow(1.0 / 30.0, 2.0)));
    CHECK(delta_q(20.0, 1.0, 1.0, 0.0) < delta_q(10.0, 1.0, 1.0, 0.0));
    CHECK_THROWS_AS(delta_q(10.0, 1.0, 1.0, 1.0), ModelError);
}

TEST_CASE("a_hat") {
    CHECK(std::abs(a_hat(1.0, 1.0, 1.0) - (7.0 + 26.0 * std::sqrt(37.0))) <= 1e-9);
    CHECK(a_hat(0.0, 1e-15, 3.0) == doctest::Approx(6.0));
    CHECK(a_hat(1.0, 1.0, 2.0) > a_hat(1.0, 1.0, 1.0));
}

TEST_CASE("delta_hat readings") {
    const double ah = a_hat(1.0, 1.0, 10.0);
    const auto dh = delta_hat_terms(10.0, 1.0, 1.0, 1.0, 0.0);
    CHECK(dh.reciprocal_term == doctest::Approx(1.0 / (24.0 * ah * ah)));
    CHECK(dh.literal_term == doctest::Approx(ah * ah / 24.0));
    const double expect = std::min({1.0 / (4.0 * ah), 1.0 / (12.0 * ah * ah), 1.0 / (24.0 * ah * ah), 1.0 / 900.0});
    CHECK(dh.reciprocal_value == doctest::Approx(expect).epsilon(1e-14));
    CHECK(delta_hat(10.0, 1.0, 1.0, 1.0, 0.0) == dh.reciprocal_value);
    CHECK(delta_hat(10.0, 1.0, 1.0, 1.0, 0.0, DeltaHatReading::literal) == dh.literal_value);
    for (double alpha : {0.0, 0.3, 0.7})
        for (double A : {2.0, 10.0, 1e3})
            CHECK(delta_hat(A, 3.0, 0.5, 0.2, alpha) <= delta_q(A, 0.5, 0.2, alpha));
}

TEST_CASE("l_bar") {
    const auto b = l_bar(0.0, 1.0, 1.0, 1.0);
    const double e = std::exp(1.0);
    CHECK(std::abs(b.l_bar_1 - 2.0 * e) <= 1e-9);
    CHECK(std::abs(b.l_bar_2 - (5.0 + 4.0 * e) / 3.0 * std::exp(6.0 * e)) <= 1e-9 * b.l_bar_2);
    CHECK(std::abs(b.l_bar - (2.0 * e + 1.0)) <= 1e-9);
    CHECK(l_bar(1.0, 2.0, 1.0, 1e-12).l_bar_1 == doctest::Approx(2.0));
    const auto c = l_bar(2.0, 0.5, 0.3, 0.7);
    CHECK(c.l_bar >= c.l_bar_1);
}

TEST_CASE("compute_constants") {
    const ConstantsReport r = compute_constants(1.0, 1.0, 1.0, 0.0, 1.0);
    CHECK(r.a_tilde == r.a_tilde_0);
    CHECK(r.delta_hat <= r.delta_q);
    CHECK(r.delta_lip == doctest::Approx(1.0 / 1920.0));
    const ConstantsReport z = compute_constants(1.0, 0.0, 1.0, 0.0, 0.0);
    CHECK(z.a_tilde_0 == 0.0);
    CHECK(z.l_bar == 0.0);
}
