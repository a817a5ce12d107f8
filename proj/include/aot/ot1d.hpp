#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "aot/empirical_measure.hpp"
#include "aot/penalty.hpp"

namespace aot {

/// Monotone transport plan between two weighted atom lists. Entries are
/// ordered north-west-corner style: nondecreasing in both indices.
struct Coupling {
    struct Entry {
        std::size_t index_u;
        std::size_t index_v;
        double mass;
    };
    std::vector<Entry> entries;
};

struct SortedOtResult {
    double cost = 0.0;
    std::vector<double> sorted_diffs;  // u^(i) - v^(i)
};

struct WeightedOtResult {
    double cost = 0.0;
    Coupling plan;
};

/// OT with cost h(u - v) between two equal-size uniform empirical samples:
/// sort both, pair order statistics, average h over the differences.
inline SortedOtResult ot_sorted(std::vector<double> u, std::vector<double> v, const PenaltyFn& h) {
    if (u.empty()) throw std::invalid_argument("ot_sorted: empty input");
    if (u.size() != v.size())
        throw std::invalid_argument("ot_sorted: length mismatch, use ot_weighted for unequal counts");
    for (double x : u) require_finite(x, "u sample");
    for (double x : v) require_finite(x, "v sample");
    std::sort(u.begin(), u.end());
    std::sort(v.begin(), v.end());
    SortedOtResult res;
    res.sorted_diffs.resize(u.size());
    const double inv_n = 1.0 / static_cast<double>(u.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        res.sorted_diffs[i] = u[i] - v[i];
        acc += inv_n * h.eval(res.sorted_diffs[i]);
    }
    res.cost = acc;
    return res;
}

/// North-west-corner (comonotone quantile) coupling between two weighted
/// measures over the merged cumulative-weight breakpoints.
inline Coupling monotone_coupling(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    Coupling plan;
    std::size_t i = 0, j = 0;
    double rem_u = mu.weights()[0];
    double rem_v = nu.weights()[0];
    const std::size_t nu_size = nu.size();
    const std::size_t mu_size = mu.size();
    while (true) {
        const double m = std::min(rem_u, rem_v);
        if (m > 0.0) plan.entries.push_back({i, j, m});
        const bool u_done = (rem_u <= rem_v);
        const bool v_done = (rem_v <= rem_u);
        if (u_done && v_done) {
            ++i;
            ++j;
            if (i >= mu_size || j >= nu_size) break;
            rem_u = mu.weights()[i];
            rem_v = nu.weights()[j];
        } else if (u_done) {
            rem_v -= rem_u;
            ++i;
            if (i >= mu_size) break;
            rem_u = mu.weights()[i];
        } else {
            rem_u -= rem_v;
            ++j;
            if (j >= nu_size) break;
            rem_v = nu.weights()[j];
        }
    }
    return plan;
}

/// Exact integral of h(Q_mu(t) - Q_nu(t)) over (0,1] as a finite sum on the
/// monotone coupling. Equals the OT_h value whenever h is convex.
inline WeightedOtResult ot_weighted(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                    const PenaltyFn& h) {
    WeightedOtResult res;
    res.plan = monotone_coupling(mu, nu);
    double acc = 0.0;
    for (const auto& e : res.plan.entries)
        acc += e.mass * h.eval(mu.atoms()[e.index_u] - nu.atoms()[e.index_v]);
    res.cost = acc;
    return res;
}

/// Exhaustive minimum over all assignments; verification oracle only.
inline double ot_bruteforce(const std::vector<double>& u, const std::vector<double>& v,
                            const PenaltyFn& h) {
    if (u.size() != v.size() || u.empty())
        throw std::invalid_argument("ot_bruteforce: need equal nonempty lists");
    if (u.size() > 8) throw std::invalid_argument("ot_bruteforce: refused for n > 8");
    const std::size_t n = u.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    const double inv_n = 1.0 / static_cast<double>(n);
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += inv_n * h.eval(u[i] - v[perm[i]]);
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace aot
