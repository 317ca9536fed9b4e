#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mfbsde/lossop.hpp"

using namespace mfbsde;

TEST_CASE("expected_loss examples") {
    const std::vector<double> sym{-1.0, 1.0};
    CHECK(expected_loss(LossSpec::linear_shift(0.0), 0.0, EmpiricalLaw::uniform(sym), 0.0) == 0.0);
    const std::vector<double> zero{0.0}, one{1.0};
    const LossSpec shifted = LossSpec::linear_shift(0.3);
    CHECK(expected_loss(shifted, 0.0, EmpiricalLaw::weighted(zero, one), 0.1) == doctest::Approx(-0.2));
    const std::vector<double> half{-0.5, 0.5};
    CHECK(std::abs(expected_loss(LossSpec::sine_perturbed(0.5), 0.0, EmpiricalLaw::uniform(half), 0.0)) <= 1e-16);
}

TEST_CASE("weighted laws validate their weights") {
    const std::vector<double> atoms{0.0, 1.0};
    const std::vector<double> bad{0.6, 0.6}, neg{1.5, -0.5}, ok{0.25, 0.75};
    CHECK_THROWS_AS(EmpiricalLaw::weighted(atoms, bad), ModelError);
    CHECK_THROWS_AS(EmpiricalLaw::weighted(atoms, neg), ModelError);
    CHECK(EmpiricalLaw::weighted(atoms, ok).mean() == 0.75);
}

TEST_CASE("loss_operator on the linear loss") {
    const LossSpec lin = LossSpec::linear_shift(0.0);
    const std::vector<double> neg{-0.5, -0.1}, pos{0.1, 0.3};
    CHECK(loss_operator(lin, 0.0, EmpiricalLaw::uniform(neg)) == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(loss_operator(lin, 0.0, EmpiricalLaw::uniform(pos)) == 0.0);
    const LossSpec a = LossSpec::linear_shift(0.0, 0.3, 1.0);
    for (double t : {0.1, 0.25, 0.5, 0.9}) {
        const std::vector<double> atoms{-0.2, 0.1, 0.4};
        const double expect = std::max(0.0, a.shift(t) - 0.1);
        const double got = loss_operator(a, t, EmpiricalLaw::uniform(atoms));
        CHECK(got >= expect - 1e-15);
        CHECK(got <= expect + kLossTolerance);
    }
}

TEST_CASE("loss_operator on the sine loss matches a brute-force scan") {
    const LossSpec s = LossSpec::sine_perturbed(0.5);
    const std::vector<double> atoms{-2.0, 0.0};
    const EmpiricalLaw law = EmpiricalLaw::uniform(atoms);
    const double x = loss_operator(s, 0.0, law);
    double scan = 0.0;
    for (long k = 0;; ++k) {
        const double c = 1e-6 * double(k);
        if (expected_loss(s, 0.0, law, c) >= 0.0) {
            scan = c;
            break;
        }
    }
    CHECK(std::abs(x - scan) <= 1e-6);
    CHECK(expected_loss(s, 0.0, law, x) >= -1e-10);
    CHECK(x == doctest::Approx(1.0).epsilon(1e-6));  // odd loss, atoms symmetric about -1
}

TEST_CASE("loss_operator returns zero when the constraint already holds") {
    const std::vector<double> atoms{0.2};
    CHECK(loss_operator(LossSpec::sine_perturbed(0.5), 0.0, EmpiricalLaw::uniform(atoms)) == 0.0);
}

TEST_CASE("bracket cap overflow is a model error") {
    const std::vector<double> atoms{-1e6};
    CHECK_THROWS_AS(loss_operator(LossSpec::linear_shift(0.0), 0.0, EmpiricalLaw::uniform(atoms), 1e-10, 1024.0),
                    ModelError);
}

TEST_CASE("monotonicity and order independence") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd(-1.0, 1.0);
    const LossSpec s = LossSpec::sine_perturbed(0.5, 0.2);
    std::vector<double> atoms(200);
    for (auto& a : atoms) a = nd(rng);
    const double base = loss_operator(s, 0.0, EmpiricalLaw::uniform(atoms));
    std::vector<double> raised = atoms;
    for (auto& a : raised) a += 0.3;
    CHECK(loss_operator(s, 0.0, EmpiricalLaw::uniform(raised)) <= base);
    std::vector<double> shuffled = atoms;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(loss_operator(s, 0.0, EmpiricalLaw::uniform(shuffled)) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("hl_lipschitz_probe examples") {
    const LossSpec lin = LossSpec::linear_shift(0.0);
    const std::vector<double> x{-1.0, -2.0, -0.5}, y{-1.4, -2.4, -0.9};
    std::vector<std::pair<EmpiricalLaw, EmpiricalLaw>> same{{EmpiricalLaw::uniform(x), EmpiricalLaw::uniform(x)}};
    CHECK(hl_lipschitz_probe(lin, 0.0, same) == 0.0);
    std::vector<std::pair<EmpiricalLaw, EmpiricalLaw>> shifted{{EmpiricalLaw::uniform(x), EmpiricalLaw::uniform(y)}};
    CHECK(hl_lipschitz_probe(lin, 0.0, shifted) == doctest::Approx(1.0).epsilon(1e-8));

    const LossSpec s = LossSpec::sine_perturbed(0.5);
    std::mt19937_64 rng(13);
    std::normal_distribution<double> nd(-0.5, 1.5);
    std::vector<std::vector<double>> store;
    store.reserve(200);
    for (int p = 0; p < 100; ++p) {
        std::vector<double> a(20), b(20);
        for (int j = 0; j < 20; ++j) {
            a[j] = nd(rng);
            b[j] = nd(rng);
        }
        store.push_back(std::move(a));
        store.push_back(std::move(b));
    }
    std::vector<std::pair<EmpiricalLaw, EmpiricalLaw>> pairs;
    for (int p = 0; p < 100; ++p)
        pairs.emplace_back(EmpiricalLaw::uniform(store[2 * p]), EmpiricalLaw::uniform(store[2 * p + 1]));
    const double worst = hl_lipschitz_probe(s, 0.0, pairs);
    CHECK(worst <= 1.0);
    CHECK(worst > 0.0);
}
