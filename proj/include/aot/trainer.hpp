#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "aot/alignment.hpp"
#include "aot/dataset.hpp"
#include "aot/dominance.hpp"
#include "aot/empirical_measure.hpp"
#include "aot/numeric.hpp"
#include "aot/penalty.hpp"
#include "aot/policy.hpp"

namespace aot {

enum class LossKind { AOT, DPO, IPO };

struct TrainConfig {
    LossKind loss = LossKind::AOT;
    PenaltyFn h = PenaltyFn::logistic(0.01);
    SortMode sort = SortMode::Hard;
    SoftSortConfig soft;
    int batch_size = 64;
    int steps = 2000;
    double lr = 1e-2;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 42;
    int eval_every = 100;

    void validate() const {
        if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
        if (steps < 1) throw std::invalid_argument("train: steps must be >= 1");
        if (!(lr >= 0.0)) throw std::invalid_argument("train: lr must be >= 0");
        if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
            throw std::invalid_argument("train: adam betas must lie in (0, 1)");
        if (!(adam_eps > 0.0)) throw std::invalid_argument("train: adam_eps must be > 0");
        if (eval_every < 1) throw std::invalid_argument("train: eval_every must be >= 1");
        if (loss == LossKind::AOT && !h.differentiable())
            throw std::invalid_argument("train: AOT needs a differentiable penalty");
    }
};

struct MetricRecord {
    int step = 0;
    double loss = 0.0;
    double w2_violation = 0.0;
    double min_margin = 0.0;
    double median_margin = 0.0;
    double wall_ms = 0.0;  // measured; reproducible outputs write this as 0
};

struct RunMetrics {
    std::vector<MetricRecord> records;
};

/// Columns: step,loss,w2_violation,min_margin,median_margin,ms.
/// The ms column is written as 0 so identical runs produce identical bytes;
/// measured wall time stays in MetricRecord::wall_ms.
inline void write_metrics_csv(const RunMetrics& metrics, std::ostream& os) {
    os << "step,loss,w2_violation,min_margin,median_margin,ms\n";
    for (const auto& r : metrics.records) {
        os << r.step << ',' << format_double(r.loss) << ',' << format_double(r.w2_violation) << ','
           << format_double(r.min_margin) << ',' << format_double(r.median_margin) << ",0\n";
    }
}

struct AdamState {
    std::vector<double> m, v;
    long t = 0;
};

/// Bias-corrected Adam update, applied in place.
inline void adam_step(AdamState& state, std::vector<double>& params, const std::vector<double>& grad,
                      const TrainConfig& cfg) {
    if (params.size() != grad.size()) throw std::invalid_argument("adam_step: shape mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state shape mismatch");
    for (double g : grad)
        if (!std::isfinite(g)) throw std::invalid_argument("adam_step: non-finite gradient");
    state.t += 1;
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.adam_beta1 * state.m[i] + (1.0 - cfg.adam_beta1) * grad[i];
        state.v[i] = cfg.adam_beta2 * state.v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
}

class TrainingDivergedError : public std::runtime_error {
public:
    TrainingDivergedError(int at_step, TabularPolicy last_good_policy, RunMetrics partial)
        : std::runtime_error("training diverged at step " + std::to_string(at_step)),
          step(at_step),
          last_good(std::move(last_good_policy)),
          metrics(std::move(partial)) {}
    int step;
    TabularPolicy last_good;
    RunMetrics metrics;
};

struct TrainResult {
    TabularPolicy policy;
    RunMetrics metrics;
};

namespace detail {

struct EvalSplit {
    PreferenceDataset train;
    PreferenceDataset holdout;
};

/// Held-out split: the last ceil(len/8) records of each stream.
inline EvalSplit split_holdout(const PreferenceDataset& data) {
    EvalSplit s;
    s.train.mode = s.holdout.mode = data.mode;
    s.train.k = s.holdout.k = data.k;
    s.train.m = s.holdout.m = data.m;
    auto cut = [](std::size_t len) { return len - (len + 7) / 8; };
    if (data.mode == PreferenceMode::Paired) {
        const std::size_t c = cut(data.paired.size());
        s.train.paired.assign(data.paired.begin(), data.paired.begin() + static_cast<long>(c));
        s.holdout.paired.assign(data.paired.begin() + static_cast<long>(c), data.paired.end());
    } else {
        const std::size_t cp = cut(data.unpaired_pos.size());
        const std::size_t cn = cut(data.unpaired_neg.size());
        s.train.unpaired_pos.assign(data.unpaired_pos.begin(),
                                    data.unpaired_pos.begin() + static_cast<long>(cp));
        s.holdout.unpaired_pos.assign(data.unpaired_pos.begin() + static_cast<long>(cp),
                                      data.unpaired_pos.end());
        s.train.unpaired_neg.assign(data.unpaired_neg.begin(),
                                    data.unpaired_neg.begin() + static_cast<long>(cn));
        s.holdout.unpaired_neg.assign(data.unpaired_neg.begin() + static_cast<long>(cn),
                                      data.unpaired_neg.end());
    }
    return s;
}

}  // namespace detail

/// Chosen/rejected implicit-reward measures r_u = logprob(theta) - logprob(ref)
/// over a dataset slice; the Fig-style evaluation pair.
inline std::pair<EmpiricalMeasure, EmpiricalMeasure> reward_measures(const TabularPolicy& theta,
                                                                     const TabularPolicy& ref,
                                                                     const PreferenceDataset& data) {
    std::vector<double> chosen, rejected;
    if (data.mode == PreferenceMode::Paired) {
        chosen.reserve(data.paired.size());
        rejected.reserve(data.paired.size());
        for (const auto& t : data.paired) {
            chosen.push_back(theta.logprob(t.x, t.y_plus) - ref.logprob(t.x, t.y_plus));
            rejected.push_back(theta.logprob(t.x, t.y_minus) - ref.logprob(t.x, t.y_minus));
        }
    } else {
        chosen.reserve(data.unpaired_pos.size());
        rejected.reserve(data.unpaired_neg.size());
        for (const auto& it : data.unpaired_pos)
            chosen.push_back(theta.logprob(it.x, it.y) - ref.logprob(it.x, it.y));
        for (const auto& it : data.unpaired_neg)
            rejected.push_back(theta.logprob(it.x, it.y) - ref.logprob(it.x, it.y));
    }
    return {EmpiricalMeasure(std::move(chosen)), EmpiricalMeasure(std::move(rejected))};
}

/// Deterministic seeded minibatch Adam loop. Streams are reshuffled with a
/// per-epoch derived seed (independently per stream in unpaired mode); the
/// final partial batch of an epoch is dropped. Non-finite or exploding loss
/// aborts with the last good checkpoint attached to the error.
inline TrainResult train(const TabularPolicy& theta0, const TabularPolicy& ref,
                         const PreferenceDataset& data, const TrainConfig& cfg) {
    cfg.validate();
    if (!theta0.same_shape(ref)) throw std::domain_error("train: policy shape mismatch");
    if ((cfg.loss == LossKind::DPO || cfg.loss == LossKind::IPO) && data.mode != PreferenceMode::Paired)
        throw std::domain_error("train: DPO/IPO require paired data");

    const detail::EvalSplit split = detail::split_holdout(data);
    const std::size_t b = static_cast<std::size_t>(cfg.batch_size);
    const std::size_t train_len = split.train.size();
    if (train_len < b)
        throw std::invalid_argument("train: training split smaller than one batch (" +
                                    std::to_string(train_len) + " < " + std::to_string(b) + ")");

    TabularPolicy policy = theta0;
    AdamState adam;
    RunMetrics metrics;
    const auto t0 = std::chrono::steady_clock::now();

    const bool unpaired = data.mode == PreferenceMode::Unpaired;
    std::vector<std::size_t> order_u(unpaired ? split.train.unpaired_pos.size()
                                              : split.train.paired.size());
    std::iota(order_u.begin(), order_u.end(), 0);
    std::vector<std::size_t> order_v;
    if (unpaired) {
        order_v.resize(split.train.unpaired_neg.size());
        std::iota(order_v.begin(), order_v.end(), 0);
    }
    const std::size_t batches_per_epoch = train_len / b;
    std::uint64_t epoch = 0;
    std::size_t batch_in_epoch = batches_per_epoch;  // force initial shuffle

    auto eval_now = [&](int step, double loss_value, const TabularPolicy& pol) {
        auto [chosen, rejected] = reward_measures(pol, ref, split.holdout);
        const DominanceReport rep = check_fsd(chosen, rejected);
        MetricRecord rec;
        rec.step = step;
        rec.loss = loss_value;
        rec.w2_violation = rep.w2_violation;
        rec.min_margin = rep.min_margin;
        rec.median_margin = rep.margin_curve[rep.margin_curve.size() / 2].second;
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                          .count();
        metrics.records.push_back(rec);
    };

    for (int step = 1; step <= cfg.steps; ++step) {
        if (batch_in_epoch == batches_per_epoch) {
            std::mt19937_64 rng_u(mix_seed(cfg.seed, epoch, 0));
            std::shuffle(order_u.begin(), order_u.end(), rng_u);
            if (unpaired) {
                std::mt19937_64 rng_v(mix_seed(cfg.seed, epoch, 1));
                std::shuffle(order_v.begin(), order_v.end(), rng_v);
            }
            ++epoch;
            batch_in_epoch = 0;
        }
        PreferenceBatch batch;
        batch.mode = data.mode;
        const std::size_t base = batch_in_epoch * b;
        if (unpaired) {
            for (std::size_t i = 0; i < b; ++i) {
                batch.unpaired_pos.push_back(split.train.unpaired_pos[order_u[base + i]]);
                batch.unpaired_neg.push_back(split.train.unpaired_neg[order_v[base + i]]);
            }
        } else {
            for (std::size_t i = 0; i < b; ++i)
                batch.paired.push_back(split.train.paired[order_u[base + i]]);
        }
        ++batch_in_epoch;

        LossOutput loss;
        switch (cfg.loss) {
            case LossKind::AOT: loss = aot_loss(policy, ref, batch, cfg.h, cfg.sort, cfg.soft); break;
            case LossKind::DPO: loss = dpo_loss(policy, ref, batch, cfg.h.beta); break;
            case LossKind::IPO: loss = ipo_loss(policy, ref, batch, cfg.h.beta); break;
        }
        if (!std::isfinite(loss.value) || std::fabs(loss.value) > 1e6)
            throw TrainingDivergedError(step, std::move(policy), std::move(metrics));

        std::vector<double> params = policy.logits();
        adam_step(adam, params, loss.grad, cfg);
        policy.set_logits(std::move(params));  // re-projects onto the clamp box

        if (step % cfg.eval_every == 0 || step == cfg.steps) eval_now(step, loss.value, policy);
    }
    return {std::move(policy), std::move(metrics)};
}

}  // namespace aot
