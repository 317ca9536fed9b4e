#include <doctest.h>

#include <cmath>

#include "mfbsde/condexp.hpp"

using namespace mfbsde;

namespace {

Eigen::VectorXd nodes(const LatticeBackend& lb, std::size_t i) { return lb.brownian(i).col(0); }

}  // namespace

TEST_CASE("lattice probabilities and node values") {
    const LatticeBackend lb(make_grid(1.0, 6));
    for (std::size_t i = 0; i <= 6; ++i) {
        CHECK(lb.states(i) == i + 1);
        CHECK(lb.model().probabilities[i].sum() == 1.0);
    }
    CHECK(lb.model().node_value(2, 0) == doctest::Approx(-2.0 * std::sqrt(1.0 / 6.0)));
}

TEST_CASE("lattice conditional expectations") {
    const TimeGrid g = make_grid(1.0, 5);
    const LatticeBackend lb(g);
    for (std::size_t i = 0; i < 5; ++i) {
        const Eigen::VectorXd c = Eigen::VectorXd::Constant(i + 2, 2.5);
        CHECK((lb.condexp(i, c).array() == 2.5).all());
        const Eigen::VectorXd b = nodes(lb, i + 1);
        CHECK((lb.condexp(i, b) - nodes(lb, i)).cwiseAbs().maxCoeff() <= 1e-15);
        const Eigen::VectorXd b2 = b.array().square();
        const Eigen::VectorXd expect = nodes(lb, i).array().square() + g.dt;
        CHECK((lb.condexp(i, b2) - expect).cwiseAbs().maxCoeff() <= 1e-14);
    }
}

TEST_CASE("lattice Z") {
    const LatticeBackend lb(make_grid(1.0, 4));
    for (std::size_t i = 0; i < 4; ++i) {
        const Eigen::VectorXd b = nodes(lb, i + 1);
        CHECK((lb.z(i, b).array() - 1.0).abs().maxCoeff() <= 1e-14);
        CHECK(lb.z(i, Eigen::VectorXd::Constant(i + 2, 3.0)).cwiseAbs().maxCoeff() == 0.0);
        const Eigen::VectorXd b2 = b.array().square();
        const Eigen::VectorXd expect = 2.0 * nodes(lb, i);
        CHECK((lb.z(i, b2).col(0) - expect).cwiseAbs().maxCoeff() <= 1e-13);
        CHECK((one_step_z(lb, i, b2).col(0) - expect).cwiseAbs().maxCoeff() <= 1e-13);
    }
}

TEST_CASE("lattice tower property") {
    const std::size_t n = 6;
    const LatticeBackend lb(make_grid(1.0, n));
    Eigen::VectorXd v = nodes(lb, n).array().cube() + nodes(lb, n).array().cos();
    const Eigen::VectorXd terminal = v;
    for (std::size_t i = n; i-- > 0;) v = lb.condexp(i, v);
    // direct expectation at step 0
    const double direct = lb.model().probabilities[n].dot(terminal);
    CHECK(v(0) == doctest::Approx(direct).epsilon(1e-15));
}

TEST_CASE("lattice path maximum") {
    const LatticeBackend lb(make_grid(1.0, 2));
    // V_i = |B_i|: paths (0, s, 2s), (0, s, 0), (0, -s, 0), (0, -s, -2s) with s = sqrt(0.5)
    std::vector<Eigen::VectorXd> v;
    for (std::size_t i = 0; i <= 2; ++i) v.push_back(nodes(lb, i).cwiseAbs());
    const double s = std::sqrt(0.5);
    CHECK(lb.expected_path_max(v, 0) == doctest::Approx((2 * s + s + s + 2 * s) / 4.0));
}

TEST_CASE("regression reproduces constants and linear targets") {
    const TimeGrid g = make_grid(1.0, 4);
    const ParticleEnsemble e = antithetic(sample_ensemble(g, 20000, 1, 4));
    const RegressionBackend rb(e, 3);
    for (std::size_t i = 0; i < 4; ++i) {
        const Eigen::VectorXd c = Eigen::VectorXd::Constant(e.N, -1.25);
        CHECK((rb.condexp(i, c).array() + 1.25).abs().maxCoeff() <= 1e-10);
        const Eigen::VectorXd b = e.state(i + 1).col(0);
        const Eigen::VectorXd fit = rb.condexp(i, b);
        CHECK(fit.mean() == doctest::Approx(b.mean()).epsilon(1e-10));
        const double rms = (fit - e.state(i).col(0)).norm() / std::sqrt(double(e.N));
        CHECK(rms <= 0.01);
    }
}

TEST_CASE("regression on a cubic target within 2 percent") {
    const TimeGrid g = make_grid(1.0, 4);
    const ParticleEnsemble e = sample_ensemble(g, 100000, 1, 21);
    const RegressionBackend rb(e, 3);
    for (std::size_t i = 1; i < 4; ++i) {
        const Eigen::VectorXd b = e.state(i).col(0);
        const Eigen::VectorXd next = e.state(i + 1).col(0).array().cube();
        const Eigen::VectorXd expect = b.array().cube() + 3.0 * g.dt * b.array();
        const double rel = (rb.condexp(i, next) - expect).norm() / expect.norm();
        CAPTURE(i);
        CHECK(rel <= 0.02);
    }
}

TEST_CASE("regression Z of a linear target") {
    const TimeGrid g = make_grid(1.0, 4);
    const ParticleEnsemble e = sample_ensemble(g, 50000, 1, 8);
    const RegressionBackend rb(e, 3);
    const Eigen::VectorXd b = e.state(3).col(0);
    const ZMatrix z = rb.z(2, b);
    CHECK(z.col(0).mean() == doctest::Approx(1.0).epsilon(0.01));
    CHECK((z.array() - 1.0).matrix().norm() / std::sqrt(double(e.N)) <= 0.05);
    const ZMatrix z0 = rb.z(0, e.state(1).col(0).array().square().matrix());
    CHECK(std::abs(z0.col(0).mean()) <= 0.05);
}

TEST_CASE("degree zero regression is plain averaging") {
    const TimeGrid g = make_grid(1.0, 3);
    const ParticleEnsemble e = sample_ensemble(g, 1000, 2, 2);
    const RegressionBackend rb(e, 0);
    const Eigen::VectorXd v = e.state(2).col(1).array().exp();
    const Eigen::VectorXd fit = rb.condexp(1, v);
    CHECK((fit.array() - v.mean()).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("rank-deficient design is rejected") {
    // ten particles cannot support the 20-term cubic basis in three dimensions
    const ParticleEnsemble e = sample_ensemble(make_grid(1.0, 2), 10, 3, 1);
    CHECK_THROWS_AS(RegressionBackend(e, 3), ModelError);
    CHECK_THROWS_AS(RegressionBasis(-1, 1), ModelError);
    CHECK(RegressionBasis(3, 2).size() == 10);
}
