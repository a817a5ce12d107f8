#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "aot/empirical_measure.hpp"
#include "aot/ot1d.hpp"
#include "aot/penalty.hpp"

namespace aot {

/// First-order stochastic dominance diagnostics for a pair of empirical
/// measures. All four violation metrics are evaluated exactly on the merged
/// cumulative-weight breakpoints; the margin curve is a plotting aid sampled
/// on a percentile grid.
struct DominanceReport {
    bool fsd_holds = false;
    double zero_one_area = 0.0;
    double w1_violation = 0.0;
    double w2_violation = 0.0;
    double min_margin = 0.0;  // exact min of Q_U - Q_V over (0,1]
    std::vector<std::pair<double, double>> margin_curve;  // (percentile, Q_U - Q_V)
};

inline std::vector<double> default_percentile_grid() {
    std::vector<double> grid;
    grid.reserve(99);
    for (int i = 1; i <= 99; ++i) grid.push_back(static_cast<double>(i) / 100.0);
    return grid;
}

inline DominanceReport check_fsd(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    DominanceReport rep;
    const Coupling plan = monotone_coupling(mu, nu);
    const PenaltyFn w2 = PenaltyFn::squared_hinge(0.0);
    double area = 0.0, w1 = 0.0, w2v = 0.0;
    double min_margin = std::numeric_limits<double>::infinity();
    for (const auto& e : plan.entries) {
        const double d = mu.atoms()[e.index_u] - nu.atoms()[e.index_v];
        if (d < 0.0) area += e.mass;
        w1 += e.mass * std::max(-d, 0.0);
        w2v += e.mass * w2.eval(d);
        min_margin = std::min(min_margin, d);
    }
    rep.zero_one_area = area;
    rep.w1_violation = w1;
    rep.w2_violation = w2v;
    rep.min_margin = min_margin;
    rep.fsd_holds = min_margin >= 0.0;

    for (double p : default_percentile_grid())
        rep.margin_curve.emplace_back(p, mu.quantile(p) - nu.quantile(p));
    return rep;
}

struct RatePoint {
    std::size_t n;
    double mean_abs_error;
};

struct RateResult {
    double slope = 0.0;  // least-squares slope of log(mean error) vs log n
    std::vector<RatePoint> points;
};

/// Empirical convergence rate of the sorted-OT estimator toward its
/// population value h(shift) for U ~ Uniform[shift, shift+width] vs
/// V ~ Uniform[0, width]. Deterministic given the seed; each (n, rep) cell
/// draws from its own counter-derived stream.
inline RateResult rate_experiment(double shift, double width, const std::vector<std::size_t>& n_grid,
                                  int reps, const PenaltyFn& h, std::uint64_t seed) {
    if (!(width > 0.0)) throw std::invalid_argument("rate_experiment: width must be > 0");
    if (n_grid.size() < 2) throw std::invalid_argument("rate_experiment: need at least two grid sizes");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        if (n_grid[i] < 4) throw std::invalid_argument("rate_experiment: each n must be >= 4");
        if (i > 0 && n_grid[i] <= n_grid[i - 1])
            throw std::invalid_argument("rate_experiment: n grid must be ascending");
    }
    if (reps < 1) throw std::invalid_argument("rate_experiment: reps must be >= 1");

    const double population = h.eval(shift);
    RateResult res;
    res.points.reserve(n_grid.size());
    for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
        const std::size_t n = n_grid[gi];
        double sum_err = 0.0;
        for (int rep = 0; rep < reps; ++rep) {
            std::mt19937_64 rng(mix_seed(seed, gi, static_cast<std::uint64_t>(rep)));
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            std::vector<double> u(n), v(n);
            for (std::size_t i = 0; i < n; ++i) u[i] = shift + width * unif(rng);
            for (std::size_t i = 0; i < n; ++i) v[i] = width * unif(rng);
            sum_err += std::fabs(ot_sorted(std::move(u), std::move(v), h).cost - population);
        }
        res.points.push_back({n, sum_err / static_cast<double>(reps)});
    }

    // least squares on (log n, log err)
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double m = static_cast<double>(res.points.size());
    for (const auto& p : res.points) {
        const double lx = std::log(static_cast<double>(p.n));
        const double ly = std::log(p.mean_abs_error);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    res.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return res;
}

}  // namespace aot
