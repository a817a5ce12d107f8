#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "aot/dataset.hpp"
#include "aot/penalty.hpp"
#include "aot/policy.hpp"
#include "aot/soft_sort.hpp"

namespace aot {

enum class SortMode { Hard, Soft };

/// Minibatch of preference data, either (x, y+, y-) triples or equal-length
/// positive/negative (x, y) streams.
struct PreferenceBatch {
    PreferenceMode mode = PreferenceMode::Paired;
    std::vector<PairedRecord> paired;
    std::vector<ItemRecord> unpaired_pos;
    std::vector<ItemRecord> unpaired_neg;

    void validate() const {
        if (mode == PreferenceMode::Paired) {
            if (paired.empty()) throw std::domain_error("batch: paired records required");
            if (!unpaired_pos.empty() || !unpaired_neg.empty())
                throw std::domain_error("batch: paired mode must not carry unpaired records");
        } else {
            if (unpaired_pos.empty() || unpaired_neg.empty())
                throw std::domain_error("batch: unpaired mode needs both streams");
            if (unpaired_pos.size() != unpaired_neg.size())
                throw std::domain_error("batch: unpaired streams must have equal length");
            if (!paired.empty()) throw std::domain_error("batch: unpaired mode must not carry triples");
        }
    }

    std::size_t size() const {
        return mode == PreferenceMode::Paired ? paired.size() : unpaired_pos.size();
    }
};

struct LossOutput {
    double value = 0.0;
    std::vector<double> grad;      // K x M, same layout as the policy logits
    std::vector<double> per_item;  // sorted margins u^(i) - v^(i)
};

namespace detail {

struct RewardVectors {
    std::vector<double> u, v;
    std::vector<RewardSample> u_samples, v_samples;
    bool v_has_grad = false;
};

inline RewardVectors batch_rewards(const TabularPolicy& theta, const TabularPolicy& ref,
                                   const PreferenceBatch& batch) {
    RewardVectors r;
    const std::size_t n = batch.size();
    r.u.reserve(n);
    r.v.reserve(n);
    r.u_samples.reserve(n);
    r.v_samples.reserve(n);
    if (batch.mode == PreferenceMode::Unpaired) {
        r.v_has_grad = true;
        for (const auto& item : batch.unpaired_pos) {
            r.u_samples.push_back(reward_unpaired(theta, ref, item.x, item.y));
            r.u.push_back(r.u_samples.back().value);
        }
        for (const auto& item : batch.unpaired_neg) {
            r.v_samples.push_back(reward_unpaired(theta, ref, item.x, item.y));
            r.v.push_back(r.v_samples.back().value);
        }
    } else {
        r.v_has_grad = false;  // reference margins are constants
        for (const auto& t : batch.paired) {
            r.u_samples.push_back(reward_paired(theta, t.x, t.y_plus, t.y_minus));
            r.u.push_back(r.u_samples.back().value);
            r.v.push_back(reward_paired(ref, t.x, t.y_plus, t.y_minus).value);
        }
    }
    return r;
}

inline void axpy(std::vector<double>& acc, double a, const std::vector<double>& x) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += a * x[i];
}

}  // namespace detail

/// Sorted-OT alignment loss: mean h over the (soft-)sorted reward margins.
/// Hard sort differentiates with the permutation held fixed; soft sort
/// back-propagates through the Sinkhorn plan.
inline LossOutput aot_loss(const TabularPolicy& theta, const TabularPolicy& ref,
                           const PreferenceBatch& batch, const PenaltyFn& h, SortMode sort,
                           const SoftSortConfig& soft_cfg = {}) {
    batch.validate();
    if (!h.differentiable()) throw std::invalid_argument("aot_loss: ZeroOne penalty is metrics-only");
    if (!theta.same_shape(ref)) throw std::domain_error("aot_loss: policy shape mismatch");

    detail::RewardVectors r = detail::batch_rewards(theta, ref, batch);
    const std::size_t n = r.u.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    LossOutput out;
    out.grad.assign(theta.prompts() * theta.responses(), 0.0);
    out.per_item.resize(n);

    if (sort == SortMode::Hard) {
        std::vector<std::size_t> ord_u(n), ord_v(n);
        std::iota(ord_u.begin(), ord_u.end(), 0);
        std::iota(ord_v.begin(), ord_v.end(), 0);
        std::stable_sort(ord_u.begin(), ord_u.end(),
                         [&](std::size_t a, std::size_t b) { return r.u[a] < r.u[b]; });
        std::stable_sort(ord_v.begin(), ord_v.end(),
                         [&](std::size_t a, std::size_t b) { return r.v[a] < r.v[b]; });
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = r.u[ord_u[i]] - r.v[ord_v[i]];
            out.per_item[i] = d;
            acc += inv_n * h.eval(d);
            const double c = inv_n * h.deriv(d);
            detail::axpy(out.grad, c, r.u_samples[ord_u[i]].grad);
            if (r.v_has_grad) detail::axpy(out.grad, -c, r.v_samples[ord_v[i]].grad);
        }
        out.value = acc;
    } else {
        const SoftSortResult su = soft_sort(r.u, soft_cfg);
        const SoftSortResult sv = soft_sort(r.v, soft_cfg);
        double acc = 0.0;
        std::vector<double> upstream(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = su.values[i] - sv.values[i];
            out.per_item[i] = d;
            acc += inv_n * h.eval(d);
            upstream[i] = inv_n * h.deriv(d);
        }
        out.value = acc;
        const std::vector<double> du = soft_sort_vjp(r.u, soft_cfg, upstream);
        for (double& c : upstream) c = -c;
        for (std::size_t j = 0; j < n; ++j)
            if (du[j] != 0.0) detail::axpy(out.grad, du[j], r.u_samples[j].grad);
        if (r.v_has_grad) {
            const std::vector<double> dv = soft_sort_vjp(r.v, soft_cfg, upstream);
            for (std::size_t j = 0; j < n; ++j)
                if (dv[j] != 0.0) detail::axpy(out.grad, dv[j], r.v_samples[j].grad);
        }
    }
    return out;
}

/// Logistic-sigmoid loss on per-triple policy-vs-reference margins.
inline LossOutput dpo_loss(const TabularPolicy& theta, const TabularPolicy& ref,
                           const PreferenceBatch& batch, double beta) {
    batch.validate();
    if (batch.mode != PreferenceMode::Paired) throw std::domain_error("dpo_loss: paired batch required");
    if (!(beta > 0.0)) throw std::invalid_argument("dpo_loss: beta must be > 0");
    if (!theta.same_shape(ref)) throw std::domain_error("dpo_loss: policy shape mismatch");

    const std::size_t n = batch.paired.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    LossOutput out;
    out.grad.assign(theta.prompts() * theta.responses(), 0.0);
    out.per_item.resize(n);
    double acc = 0.0;
    const std::size_t m = theta.responses();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& t = batch.paired[i];
        const double margin = (theta.logit(t.x, t.y_plus) - theta.logit(t.x, t.y_minus)) -
                              (ref.logit(t.x, t.y_plus) - ref.logit(t.x, t.y_minus));
        out.per_item[i] = margin;
        acc += inv_n * log1pexp(-beta * margin);
        const double c = inv_n * (-beta * sigmoid(-beta * margin));
        out.grad[t.x * m + t.y_plus] += c;
        out.grad[t.x * m + t.y_minus] -= c;
    }
    out.value = acc;
    std::sort(out.per_item.begin(), out.per_item.end());
    return out;
}

/// Per-triple least-squares loss (beta - margin)^2, no sorting.
inline LossOutput ipo_loss(const TabularPolicy& theta, const TabularPolicy& ref,
                           const PreferenceBatch& batch, double beta) {
    batch.validate();
    if (batch.mode != PreferenceMode::Paired) throw std::domain_error("ipo_loss: paired batch required");
    if (!(beta > 0.0)) throw std::invalid_argument("ipo_loss: beta must be > 0");
    if (!theta.same_shape(ref)) throw std::domain_error("ipo_loss: policy shape mismatch");

    const std::size_t n = batch.paired.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    LossOutput out;
    out.grad.assign(theta.prompts() * theta.responses(), 0.0);
    out.per_item.resize(n);
    double acc = 0.0;
    const std::size_t m = theta.responses();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& t = batch.paired[i];
        const double margin = (theta.logit(t.x, t.y_plus) - theta.logit(t.x, t.y_minus)) -
                              (ref.logit(t.x, t.y_plus) - ref.logit(t.x, t.y_minus));
        out.per_item[i] = margin;
        const double gap = beta - margin;
        acc += inv_n * gap * gap;
        const double c = inv_n * (-2.0 * gap);
        out.grad[t.x * m + t.y_plus] += c;
        out.grad[t.x * m + t.y_minus] -= c;
    }
    out.value = acc;
    std::sort(out.per_item.begin(), out.per_item.end());
    return out;
}

}  // namespace aot
