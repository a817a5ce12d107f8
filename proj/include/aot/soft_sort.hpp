#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "aot/numeric.hpp"

namespace aot {

struct SoftSortConfig {
    double epsilon = 0.1;
    int max_iters = 500;
    double tol = 1e-6;

    void validate() const {
        if (!(epsilon > 0.0)) throw std::invalid_argument("soft sort: epsilon must be > 0");
        if (max_iters < 1) throw std::invalid_argument("soft sort: max_iters must be >= 1");
        if (!(tol > 0.0)) throw std::invalid_argument("soft sort: tol must be > 0");
    }
};

class SinkhornConvergenceError : public std::runtime_error {
public:
    SinkhornConvergenceError(double violation, double tol)
        : std::runtime_error("Sinkhorn failed to converge: marginal violation " +
                             format_double(violation) + " > tol " + format_double(tol)),
          achieved_violation(violation) {}
    double achieved_violation;
};

struct SoftSortResult {
    std::vector<double> values;  // nondecreasing soft order statistics
    std::vector<double> plan;    // row-major n x n, row/col sums 1/n within tol
    double marginal_violation = 0.0;
};

namespace detail {

// Entropic OT between the inputs and their own sorted copy (the anchors).
// Since both marginals are the same multiset, the optimal row and column
// potentials coincide in sorted coordinates; the damped update
//   phi <- (phi + (log 1/n - LSE_l(phi_l + negC_kl))) / 2
// kills the antisymmetric residual mode that makes plain alternating
// Sinkhorn crawl on weakly coupled clusters. Runs exactly max_iters
// iterations so the map stays a fixed smooth composition of the input.
struct SinkhornState {
    std::vector<std::size_t> order;       // ascending stable argsort of x
    std::vector<double> sorted;           // x[order]
    std::vector<double> neg_cost;         // -(a_k - a_l)^2 / eps, n x n
    std::vector<std::vector<double>> phi; // phi[t] after t damped updates, t = 0..T
};

inline void sinkhorn_symmetric(const std::vector<double>& x, const SoftSortConfig& cfg,
                               SinkhornState& st) {
    cfg.validate();
    const std::size_t n = x.size();
    if (n == 0) throw std::invalid_argument("soft_sort: empty input");
    for (double v : x) require_finite(v, "soft_sort input");

    st.order.resize(n);
    std::iota(st.order.begin(), st.order.end(), 0);
    std::stable_sort(st.order.begin(), st.order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    st.sorted.resize(n);
    for (std::size_t k = 0; k < n; ++k) st.sorted[k] = x[st.order[k]];

    const double inv_eps = 1.0 / cfg.epsilon;
    st.neg_cost.resize(n * n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l) {
            const double d = st.sorted[k] - st.sorted[l];
            st.neg_cost[k * n + l] = -d * d * inv_eps;
        }

    const double log_marginal = -std::log(static_cast<double>(n));
    st.phi.assign(1, std::vector<double>(n, 0.0));
    std::vector<double> row(n), next(n);
    for (int t = 0; t < cfg.max_iters; ++t) {
        const std::vector<double>& cur = st.phi.back();
        for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t l = 0; l < n; ++l) row[l] = cur[l] + st.neg_cost[k * n + l];
            next[k] = 0.5 * (cur[k] + log_marginal - logsumexp(row));
        }
        st.phi.push_back(next);
    }
}

}  // namespace detail

/// Differentiable sort via entropic optimal transport toward the hard-sorted
/// anchors. values_j is the plan-weighted barycenter of the inputs matched to
/// the j-th anchor: nondecreasing, mass preserving, and converging to the
/// hard sort as epsilon -> 0. Throws SinkhornConvergenceError when the plan
/// marginals still violate cfg.tol after cfg.max_iters iterations.
inline SoftSortResult soft_sort(const std::vector<double>& x, const SoftSortConfig& cfg = {}) {
    detail::SinkhornState st;
    detail::sinkhorn_symmetric(x, cfg, st);
    const std::size_t n = x.size();
    const std::vector<double>& phi = st.phi.back();

    // plan in sorted coordinates; bitwise symmetric by construction
    std::vector<double> plan_sorted(n * n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l)
            plan_sorted[k * n + l] = std::exp(phi[k] + phi[l] + st.neg_cost[k * n + l]);

    const double marginal = 1.0 / static_cast<double>(n);
    double viol = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double s = 0.0;
        for (std::size_t l = 0; l < n; ++l) s += plan_sorted[k * n + l];
        viol = std::max(viol, std::fabs(s - marginal));
    }
    if (viol > cfg.tol) throw SinkhornConvergenceError(viol, cfg.tol);

    SoftSortResult res;
    res.marginal_violation = viol;
    res.values.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += plan_sorted[k * n + j] * st.sorted[k];
        res.values[j] = static_cast<double>(n) * s;
    }
    // rows back in input order: row i of the plan couples x_i to anchor j
    res.plan.resize(n * n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l)
            res.plan[st.order[k] * n + l] = plan_sorted[k * n + l];
    return res;
}

/// Gradient of <upstream, soft_sort(x).values> with respect to x, by
/// reverse-mode through the unrolled damped Sinkhorn iterations. The sort
/// permutation behind the anchors is held fixed (its derivative is zero
/// almost everywhere); the anchor values move with the input through it.
inline std::vector<double> soft_sort_vjp(const std::vector<double>& x, const SoftSortConfig& cfg,
                                         const std::vector<double>& upstream) {
    if (upstream.size() != x.size())
        throw std::invalid_argument("soft_sort_vjp: upstream shape mismatch");
    detail::SinkhornState st;
    detail::sinkhorn_symmetric(x, cfg, st);
    const std::size_t n = x.size();
    const double nd = static_cast<double>(n);
    const double inv_eps = 1.0 / cfg.epsilon;
    const std::vector<double>& phi = st.phi.back();

    std::vector<double> plan_sorted(n * n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l)
            plan_sorted[k * n + l] = std::exp(phi[k] + phi[l] + st.neg_cost[k * n + l]);

    // verify convergence exactly as the forward pass would
    const double marginal = 1.0 / nd;
    double viol = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double s = 0.0;
        for (std::size_t l = 0; l < n; ++l) s += plan_sorted[k * n + l];
        viol = std::max(viol, std::fabs(s - marginal));
    }
    if (viol > cfg.tol) throw SinkhornConvergenceError(viol, cfg.tol);

    std::vector<double> d_sorted(n, 0.0);   // gradient w.r.t. row values a_k
    std::vector<double> d_neg_cost(n * n, 0.0);
    std::vector<double> d_phi(n, 0.0);

    // values_j = n * sum_k P_kj a_k, P_kl = exp(phi_k + phi_l + negC_kl)
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t l = 0; l < n; ++l) {
            const double P = plan_sorted[k * n + l];
            const double dS = nd * upstream[l] * st.sorted[k] * P;
            d_sorted[k] += nd * upstream[l] * P;
            d_phi[k] += dS;  // row occurrence of phi
            d_phi[l] += dS;  // column occurrence of phi
            d_neg_cost[k * n + l] += dS;
        }
    }

    // phi^t_k = (phi^{t-1}_k + log(1/n) - LSE_l(phi^{t-1}_l + negC_kl)) / 2
    const int T = static_cast<int>(st.phi.size()) - 1;
    std::vector<double> row(n), d_prev(n);
    for (int t = T; t >= 1; --t) {
        const std::vector<double>& prev = st.phi[static_cast<std::size_t>(t - 1)];
        for (std::size_t k = 0; k < n; ++k) d_prev[k] = 0.5 * d_phi[k];
        for (std::size_t k = 0; k < n; ++k) {
            if (d_phi[k] == 0.0) continue;
            for (std::size_t l = 0; l < n; ++l) row[l] = prev[l] + st.neg_cost[k * n + l];
            const double lse = logsumexp(row);
            const double gk = 0.5 * d_phi[k];
            for (std::size_t l = 0; l < n; ++l) {
                const double q = std::exp(row[l] - lse);
                d_prev[l] -= gk * q;
                d_neg_cost[k * n + l] -= gk * q;
            }
        }
        d_phi.swap(d_prev);
    }
    // phi^0 = 0 is constant; d_phi is dropped here.

    // negC_kl = -(a_k - a_l)^2 / eps; both occurrences move with the input,
    // the sort permutation itself is locally constant (zero derivative a.e.)
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t l = 0; l < n; ++l) {
            const double c = d_neg_cost[k * n + l] * (-2.0 * (st.sorted[k] - st.sorted[l]) * inv_eps);
            d_sorted[k] += c;
            d_sorted[l] -= c;
        }
    }

    std::vector<double> dx(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) dx[st.order[k]] = d_sorted[k];
    return dx;
}

}  // namespace aot
