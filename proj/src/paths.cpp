#include "mfbsde/paths.hpp"

#include <cmath>
#include <numbers>

#include "mfbsde/model.hpp"
#include "mfbsde/parallel.hpp"

namespace mfbsde {

TimeGrid make_grid(double T, std::size_t n) {
    if (!(T > 0.0)) throw ModelError("paths: horizon must be positive");
    if (n < 1) throw ModelError("paths: grid needs at least one step");
    TimeGrid g;
    g.T = T;
    g.n = n;
    g.dt = T / static_cast<double>(n);
    g.nodes.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) g.nodes[i] = static_cast<double>(i) * T / static_cast<double>(n);
    g.nodes[n] = T;
    return g;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t e) {
    std::uint64_t h = splitmix(seed);
    h = splitmix(h ^ a);
    h = splitmix(h ^ b);
    h = splitmix(h ^ c);
    return splitmix(h ^ e);
}

// 53-bit uniform in (0, 1)
double to_open_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

double counter_normal(std::uint64_t seed, std::uint64_t particle, std::uint64_t step, std::uint64_t coord) {
    const double u1 = to_open_unit(mix(seed, particle, step, coord, 0));
    const double u2 = to_open_unit(mix(seed, particle, step, coord, 1));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Eigen::MatrixXd ParticleEnsemble::state(std::size_t step) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(N), d);
    for (int j = 0; j < d; ++j) out.col(j) = states[static_cast<std::size_t>(j)].col(static_cast<Eigen::Index>(step));
    return out;
}

Eigen::MatrixXd ParticleEnsemble::increment(std::size_t step) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(N), d);
    for (int j = 0; j < d; ++j)
        out.col(j) = increments[static_cast<std::size_t>(j)].col(static_cast<Eigen::Index>(step));
    return out;
}

ParticleEnsemble sample_ensemble(const TimeGrid& grid, std::size_t N, int d, std::uint64_t seed, unsigned workers) {
    if (N < 2) throw ModelError("paths: ensemble needs at least two particles");
    if (d < 1) throw ModelError("paths: dimension must be at least one");
    ParticleEnsemble e;
    e.grid = grid;
    e.N = N;
    e.d = d;
    e.seed = seed;
    const auto rows = static_cast<Eigen::Index>(N);
    const auto steps = static_cast<Eigen::Index>(grid.n);
    e.increments.assign(static_cast<std::size_t>(d), Eigen::MatrixXd(rows, steps));
    e.states.assign(static_cast<std::size_t>(d), Eigen::MatrixXd(rows, steps + 1));
    const double sd = std::sqrt(grid.dt);
    parallel_blocks(N, workers, [&](std::size_t begin, std::size_t end, std::size_t) {
        for (std::size_t p = begin; p < end; ++p) {
            const auto r = static_cast<Eigen::Index>(p);
            for (int j = 0; j < d; ++j) {
                auto& inc = e.increments[static_cast<std::size_t>(j)];
                auto& st = e.states[static_cast<std::size_t>(j)];
                st(r, 0) = 0.0;
                for (Eigen::Index i = 0; i < steps; ++i) {
                    inc(r, i) = sd * counter_normal(seed, p, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j));
                    st(r, i + 1) = st(r, i) + inc(r, i);
                }
            }
        }
    });
    return e;
}

ParticleEnsemble antithetic(const ParticleEnsemble& src) {
    ParticleEnsemble e;
    e.grid = src.grid;
    e.N = 2 * src.N;
    e.d = src.d;
    e.seed = src.seed;
    e.antithetic = true;
    const auto rows = static_cast<Eigen::Index>(src.N);
    for (int j = 0; j < src.d; ++j) {
        const auto& inc = src.increments[static_cast<std::size_t>(j)];
        const auto& st = src.states[static_cast<std::size_t>(j)];
        Eigen::MatrixXd inc2(2 * rows, inc.cols()), st2(2 * rows, st.cols());
        for (Eigen::Index p = 0; p < rows; ++p) {
            inc2.row(2 * p) = inc.row(p);
            inc2.row(2 * p + 1) = -inc.row(p);
            st2.row(2 * p) = st.row(p);
            st2.row(2 * p + 1) = -st.row(p);
        }
        e.increments.push_back(std::move(inc2));
        e.states.push_back(std::move(st2));
    }
    return e;
}

}  // namespace mfbsde
