#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace mfbsde {

/// Uniform grid t_i = i T / n on [0, T].
struct TimeGrid {
    double T = 1.0;
    std::size_t n = 1;
    double dt = 1.0;
    std::vector<double> nodes;

    double t(std::size_t i) const { return nodes[i]; }
};

TimeGrid make_grid(double T, std::size_t n);

/// N simulated d-dimensional Brownian paths on a grid.
///
/// Storage is one N x n (increments) and one N x (n+1) (states) matrix per
/// Brownian coordinate. The increment of particle p, step i, coordinate j is a
/// pure function of (seed, p, i, j); antithetic ensembles interleave each path
/// with its negation (rows 2p and 2p+1).
struct ParticleEnsemble {
    TimeGrid grid;
    std::size_t N = 0;
    int d = 1;
    std::uint64_t seed = 0;
    bool antithetic = false;
    std::vector<Eigen::MatrixXd> increments;
    std::vector<Eigen::MatrixXd> states;

    /// B_{t_i} for every particle, N x d.
    Eigen::MatrixXd state(std::size_t step) const;
    /// B_{t_{i+1}} - B_{t_i} for every particle, N x d.
    Eigen::MatrixXd increment(std::size_t step) const;
};

/// Standard normal draw addressed by a counter; identical inputs give
/// bit-identical outputs on every run and thread layout.
double counter_normal(std::uint64_t seed, std::uint64_t particle, std::uint64_t step, std::uint64_t coord);

ParticleEnsemble sample_ensemble(const TimeGrid& grid, std::size_t N, int d, std::uint64_t seed,
                                 unsigned workers = 1);

/// 2N-particle ensemble pairing every path with its reflection -B.
ParticleEnsemble antithetic(const ParticleEnsemble& ensemble);

}  // namespace mfbsde
