// Command-line front end: synthetic data generation, alignment training,
// dominance diagnostics, quantile-margin export, rate experiments, and the
// built-in oracle self-check. Logs go to stderr; data goes to files or stdout.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "aot/aot.hpp"

#include <CLI11.hpp>
#include <json.hpp>

namespace {

using namespace aot;

PreferenceMode parse_mode(const std::string& s) {
    if (s == "paired") return PreferenceMode::Paired;
    if (s == "unpaired") return PreferenceMode::Unpaired;
    throw CLI::ValidationError("--mode", "must be 'paired' or 'unpaired'");
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
    std::vector<std::size_t> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(static_cast<std::size_t>(std::stoull(tok)));
    }
    return out;
}

int run_gen(const std::string& out, std::size_t k, std::size_t m, std::size_t n,
            const std::string& mode, double temp, std::uint64_t seed) {
    PreferenceDataset d = generate(k, m, n, parse_mode(mode), temp, seed);
    save_dataset(d, out);
    std::cerr << "gen: wrote " << (d.mode == PreferenceMode::Paired ? d.paired.size()
                                                                    : d.unpaired_pos.size() +
                                                                          d.unpaired_neg.size())
              << " records to " << out << "\n";
    return 0;
}

struct AlignArgs {
    std::string data, mode = "auto", loss = "aot", h_spec = "logistic:0.01", sort = "hard";
    double soft_eps = 0.1, soft_tol = 1e-6;
    int soft_iters = 500;
    int batch = 64, steps = 2000, eval_every = 100;
    double lr = 1e-2;
    std::uint64_t seed = 42;
    std::string ref_path, init_path, out, metrics_path;
};

int run_align(const AlignArgs& a) {
    TrainConfig cfg;
    if (a.loss == "aot")
        cfg.loss = LossKind::AOT;
    else if (a.loss == "dpo")
        cfg.loss = LossKind::DPO;
    else if (a.loss == "ipo")
        cfg.loss = LossKind::IPO;
    else
        throw CLI::ValidationError("--loss", "must be aot, dpo, or ipo");
    cfg.h = PenaltyFn::parse(a.h_spec);
    if (a.sort == "hard")
        cfg.sort = SortMode::Hard;
    else if (a.sort == "soft")
        cfg.sort = SortMode::Soft;
    else
        throw CLI::ValidationError("--sort", "must be hard or soft");
    if (a.mode != "auto" && a.mode != "paired" && a.mode != "unpaired")
        throw CLI::ValidationError("--mode", "must be paired or unpaired");
    cfg.soft = SoftSortConfig{a.soft_eps, a.soft_iters, a.soft_tol};
    cfg.batch_size = a.batch;
    cfg.steps = a.steps;
    cfg.lr = a.lr;
    cfg.seed = a.seed;
    cfg.eval_every = a.eval_every;

    PreferenceDataset data = load_dataset(a.data);
    if (a.mode == "unpaired")
        data = data.as_unpaired();
    else if (a.mode == "paired" && data.mode != PreferenceMode::Paired)
        throw std::runtime_error("align: dataset is unpaired, cannot form triples");

    TabularPolicy ref = a.ref_path.empty() ? TabularPolicy(data.k, data.m)
                                           : TabularPolicy::load(a.ref_path);
    TabularPolicy init = a.init_path.empty() ? TabularPolicy(data.k, data.m)
                                             : TabularPolicy::load(a.init_path);
    if (ref.prompts() < data.k || ref.responses() < data.m)
        throw std::runtime_error("align: dataset indices exceed --ref policy shape");

    if (data.mode == PreferenceMode::Unpaired)
        std::cerr << "align: unpaired streams are shuffled independently each epoch\n";
    std::cerr << "align: loss=" << a.loss << " h=" << cfg.h.to_string() << " sort=" << a.sort
              << " batch=" << cfg.batch_size << " steps=" << cfg.steps << " lr=" << cfg.lr
              << " seed=" << cfg.seed << "\n";

    TrainResult result = [&] {
        try {
            return train(init, ref, data, cfg);
        } catch (const TrainingDivergedError& e) {
            std::cerr << "align: " << e.what() << "; saving last good checkpoint\n";
            e.last_good.save(a.out);
            if (!a.metrics_path.empty()) {
                std::ofstream os(a.metrics_path, std::ios::binary);
                write_metrics_csv(e.metrics, os);
            }
            throw;
        }
    }();

    result.policy.save(a.out);
    if (!a.metrics_path.empty()) {
        std::ofstream os(a.metrics_path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open for writing: " + a.metrics_path);
        write_metrics_csv(result.metrics, os);
    }
    if (!result.metrics.records.empty()) {
        const auto& last = result.metrics.records.back();
        std::cerr << "align: final loss=" << format_double(last.loss)
                  << " heldout w2=" << format_double(last.w2_violation)
                  << " min_margin=" << format_double(last.min_margin)
                  << " (" << format_double(last.wall_ms) << " ms)\n";
    }
    return 0;
}

nlohmann::ordered_json report_to_json(const DominanceReport& rep) {
    nlohmann::ordered_json j;
    j["fsd_holds"] = rep.fsd_holds;
    j["zero_one_area"] = rep.zero_one_area;
    j["w1_violation"] = rep.w1_violation;
    j["w2_violation"] = rep.w2_violation;
    j["min_margin"] = rep.min_margin;
    auto curve = nlohmann::ordered_json::array();
    for (const auto& [p, margin] : rep.margin_curve) curve.push_back({p, margin});
    j["margin_curve"] = curve;
    return j;
}

int run_dominance(const std::string& u_path, const std::string& v_path, const std::string& h_spec) {
    const EmpiricalMeasure u = EmpiricalMeasure::load_csv(u_path);
    const EmpiricalMeasure v = EmpiricalMeasure::load_csv(v_path);
    nlohmann::ordered_json j = report_to_json(check_fsd(u, v));
    if (!h_spec.empty()) {
        const PenaltyFn h = PenaltyFn::parse(h_spec);
        j["h"] = h.to_string();
        j["ot_cost"] = ot_weighted(u, v, h).cost;
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int run_quantiles(const std::string& u_path, const std::string& v_path, const std::string& out) {
    const EmpiricalMeasure u = EmpiricalMeasure::load_csv(u_path);
    const EmpiricalMeasure v = EmpiricalMeasure::load_csv(v_path);
    std::ofstream os(out, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + out);
    os << "p,q_u,q_v,margin\n";
    for (double p : default_percentile_grid()) {
        const double qu = u.quantile(p), qv = v.quantile(p);
        os << format_double(p) << ',' << format_double(qu) << ',' << format_double(qv) << ','
           << format_double(qu - qv) << '\n';
    }
    return 0;
}

int run_rate(double shift, double width, const std::string& ns, int reps, std::uint64_t seed,
             const std::string& h_spec) {
    const RateResult res =
        rate_experiment(shift, width, parse_size_list(ns), reps, PenaltyFn::parse(h_spec), seed);
    std::cout << "n,mean_abs_error\n";
    for (const auto& p : res.points)
        std::cout << p.n << ',' << format_double(p.mean_abs_error) << '\n';
    std::cout << "slope," << format_double(res.slope) << "\n";
    return 0;
}

// Sorted-OT vs brute force, then analytic loss gradients vs central finite
// differences. --corrupt-h-deriv biases the analytic side so tests can
// confirm the check actually catches a broken derivative.
int run_oracle_check(int trials, std::uint64_t seed, bool corrupt) {
    if (trials < 1) throw CLI::ValidationError("--trials", "must be >= 1");
    std::mt19937_64 rng(mix_seed(seed, 0xabcdef));
    std::uniform_real_distribution<double> val(-5.0, 5.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto random_h = [&]() {
        switch (static_cast<int>(rng() % 4)) {
            case 0: return PenaltyFn::hinge();
            case 1: return PenaltyFn::squared_hinge(unit(rng));
            case 2: return PenaltyFn::logistic(0.1 + 2.0 * unit(rng), 0.4 * unit(rng));
            default: return PenaltyFn::least_squares(unit(rng));
        }
    };

    double max_sorted_gap = 0.0;
    for (int t = 0; t < trials; ++t) {
        const std::size_t n = 2 + rng() % 6;
        std::vector<double> u(n), v(n);
        for (auto& x : u) x = val(rng);
        for (auto& x : v) x = val(rng);
        const PenaltyFn h = random_h();
        const double gap = std::fabs(ot_sorted(u, v, h).cost - ot_bruteforce(u, v, h));
        max_sorted_gap = std::max(max_sorted_gap, gap);
    }
    const bool sorted_ok = max_sorted_gap <= 1e-12;

    double max_grad_rel = 0.0;
    std::normal_distribution<double> logit(0.0, 1.0);
    for (int t = 0; t < trials; ++t) {
        const std::size_t k = 2 + rng() % 3, m = 2 + rng() % 4;
        std::vector<double> th(k * m), rf(k * m);
        for (auto& x : th) x = logit(rng);
        for (auto& x : rf) x = logit(rng);
        TabularPolicy theta(k, m, th), ref(k, m, rf);

        PreferenceBatch batch;
        const std::size_t b = 2 + rng() % 6;
        const bool unpaired = rng() % 2 == 0;
        batch.mode = unpaired ? PreferenceMode::Unpaired : PreferenceMode::Paired;
        for (std::size_t i = 0; i < b; ++i) {
            const std::size_t x = rng() % k;
            std::size_t yp = rng() % m, ym = rng() % m;
            while (ym == yp) ym = rng() % m;
            if (unpaired) {
                batch.unpaired_pos.push_back({x, yp});
                batch.unpaired_neg.push_back({rng() % k, ym});
            } else {
                batch.paired.push_back({x, yp, ym});
            }
        }
        PenaltyFn h = random_h();
        if (h.kind == PenaltyKind::Hinge) h = PenaltyFn::logistic(1.0);
        const SortMode sort = (rng() % 2 == 0) ? SortMode::Hard : SortMode::Soft;
        const SoftSortConfig soft{0.1, 200, 1e-8};

        LossOutput out = aot_loss(theta, ref, batch, h, sort, soft);
        const std::size_t idx = rng() % (k * m);
        double analytic = out.grad[idx];
        if (corrupt) analytic = analytic * 1.05 + 1e-3;

        const double step = 1e-5;
        auto eval_at = [&](double delta) {
            std::vector<double> lg = theta.logits();
            lg[idx] += delta;
            TabularPolicy moved(k, m, lg);
            return aot_loss(moved, ref, batch, h, sort, soft).value;
        };
        const double fd = (eval_at(step) - eval_at(-step)) / (2.0 * step);
        const double rel = std::fabs(analytic - fd) / std::max({std::fabs(fd), std::fabs(analytic), 1e-8});
        if (std::fabs(analytic - fd) > 1e-10) max_grad_rel = std::max(max_grad_rel, rel);
    }
    const bool grad_ok = max_grad_rel <= 1e-4;

    std::cout << "sorted-vs-bruteforce: max |gap| = " << format_double(max_sorted_gap) << " -> "
              << (sorted_ok ? "ok" : "FAIL") << "\n";
    std::cout << "gradient-vs-finite-diff: max rel = " << format_double(max_grad_rel) << " -> "
              << (grad_ok ? "ok" : "FAIL") << "\n";
    return (sorted_ok && grad_ok) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributional preference alignment via sorted 1-D optimal transport"};
    app.set_version_flag("--version", std::string(aot::kVersion));
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic planted-reward preference dataset");
    std::size_t g_k = 4, g_m = 8, g_n = 4096;
    std::string g_mode = "paired", g_out;
    double g_temp = 0.5;
    std::uint64_t g_seed = 7;
    gen->add_option("--k", g_k, "prompt count");
    gen->add_option("--m", g_m, "response count");
    gen->add_option("--n", g_n, "record count (per stream when unpaired)");
    gen->add_option("--mode", g_mode, "paired|unpaired");
    gen->add_option("--temp", g_temp, "softmax temperature of the planted sampler");
    gen->add_option("--seed", g_seed, "generator seed");
    gen->add_option("--out", g_out, "output JSONL path")->required();

    // align
    auto* align = app.add_subcommand("align", "Train a tabular policy on preference data");
    align->set_help_flag("--help", "print help");  // frees -h; the penalty flag is --h
    AlignArgs a;
    align->add_option("--data", a.data, "JSONL dataset")->required();
    align->add_option("--mode", a.mode, "paired|unpaired (default: dataset's own mode)");
    align->add_option("--loss", a.loss, "aot|dpo|ipo");
    align->add_option("--h", a.h_spec, "penalty: zero-one|hinge|hinge2:b|logistic:b[:l]|ls:b");
    align->add_option("--sort", a.sort, "hard|soft");
    align->add_option("--soft-eps", a.soft_eps, "entropic regularization strength");
    align->add_option("--soft-iters", a.soft_iters, "Sinkhorn iteration count");
    align->add_option("--soft-tol", a.soft_tol, "Sinkhorn marginal tolerance");
    align->add_option("--batch", a.batch, "minibatch size");
    align->add_option("--steps", a.steps, "optimizer steps");
    align->add_option("--lr", a.lr, "Adam learning rate");
    align->add_option("--seed", a.seed, "shuffling seed");
    align->add_option("--ref", a.ref_path, "reference policy checkpoint (default: uniform)");
    align->add_option("--init", a.init_path, "initial policy checkpoint (default: uniform)");
    align->add_option("--out", a.out, "output checkpoint path")->required();
    align->add_option("--metrics", a.metrics_path, "metrics CSV path");
    align->add_option("--eval-every", a.eval_every, "evaluation period in steps");

    // dominance
    auto* dom = app.add_subcommand("dominance", "FSD diagnostics for two sample CSVs");
    dom->set_help_flag("--help", "print help");
    std::string d_u, d_v, d_h;
    dom->add_option("--u", d_u, "CSV of the candidate-dominant samples")->required();
    dom->add_option("--v", d_v, "CSV of the reference samples")->required();
    dom->add_option("--h", d_h, "also report the OT cost for this penalty");

    // quantiles
    auto* quant = app.add_subcommand("quantiles", "Write the quantile margin curve as CSV");
    std::string q_u, q_v, q_out;
    quant->add_option("--u", q_u, "CSV of the candidate-dominant samples")->required();
    quant->add_option("--v", q_v, "CSV of the reference samples")->required();
    quant->add_option("--out", q_out, "output CSV path")->required();

    // rate
    auto* rate = app.add_subcommand("rate", "Empirical convergence rate of the sorted-OT estimator");
    rate->set_help_flag("--help", "print help");
    double r_shift = 0.3, r_width = 1.0;
    std::string r_ns = "16,64,256,1024,4096", r_h = "ls:0";
    int r_reps = 200;
    std::uint64_t r_seed = 0;
    rate->add_option("--shift", r_shift, "location shift between the two uniforms");
    rate->add_option("--width", r_width, "support width");
    rate->add_option("--ns", r_ns, "comma-separated ascending sample sizes");
    rate->add_option("--reps", r_reps, "repetitions per sample size");
    rate->add_option("--seed", r_seed, "stream seed");
    rate->add_option("--h", r_h, "penalty spec");

    // oracle-check
    auto* oracle = app.add_subcommand("oracle-check", "Self-check against brute-force oracles");
    int o_trials = 200;
    std::uint64_t o_seed = 0;
    bool o_corrupt = false;
    oracle->add_option("--trials", o_trials, "instances per suite");
    oracle->add_option("--seed", o_seed, "stream seed");
    oracle->add_flag("--corrupt-h-deriv", o_corrupt)->group("");  // test fixture

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        app.exit(e);
        return 2;
    }

    try {
        if (*gen) return run_gen(g_out, g_k, g_m, g_n, g_mode, g_temp, g_seed);
        if (*align) return run_align(a);
        if (*dom) return run_dominance(d_u, d_v, d_h);
        if (*quant) return run_quantiles(q_u, q_v, q_out);
        if (*rate) return run_rate(r_shift, r_width, r_ns, r_reps, r_seed, r_h);
        if (*oracle) return run_oracle_check(o_trials, o_seed, o_corrupt);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
