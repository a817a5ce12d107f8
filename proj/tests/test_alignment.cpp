#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "aot/alignment.hpp"
#include "aot/dataset.hpp"
#include "aot/dominance.hpp"
#include "aot/trainer.hpp"

using namespace aot;

namespace {

TabularPolicy random_policy(std::size_t k, std::size_t m, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    std::vector<double> logits(k * m);
    for (auto& v : logits) v = normal(rng);
    return TabularPolicy(k, m, logits);
}

PreferenceBatch random_batch(std::size_t k, std::size_t m, std::size_t b, PreferenceMode mode,
                             std::mt19937_64& rng) {
    PreferenceBatch batch;
    batch.mode = mode;
    for (std::size_t i = 0; i < b; ++i) {
        const std::size_t x = rng() % k;
        std::size_t yp = rng() % m, ym = rng() % m;
        while (ym == yp) ym = rng() % m;
        if (mode == PreferenceMode::Paired) {
            batch.paired.push_back({x, yp, ym});
        } else {
            batch.unpaired_pos.push_back({x, yp});
            batch.unpaired_neg.push_back({rng() % k, ym});
        }
    }
    return batch;
}

}  // namespace

TEST_CASE("identical policies give the zero-margin loss value") {
    std::mt19937_64 rng(1);
    const auto theta = random_policy(3, 4, rng);
    const auto batch = random_batch(3, 4, 6, PreferenceMode::Unpaired, rng);
    const auto out = aot_loss(theta, theta, batch, PenaltyFn::logistic(1.0), SortMode::Hard);
    CHECK(out.value == Catch::Approx(std::log(2.0)).margin(1e-14));
    for (double d : out.per_item) CHECK(d == 0.0);
    const auto sq = aot_loss(theta, theta, batch, PenaltyFn::squared_hinge(0.25), SortMode::Hard);
    CHECK(sq.value == Catch::Approx(0.0625).margin(1e-14));
}

TEST_CASE("batch validation rejects bad shapes and ZeroOne penalties") {
    std::mt19937_64 rng(2);
    const auto theta = random_policy(2, 3, rng);
    PreferenceBatch empty;
    empty.mode = PreferenceMode::Paired;
    CHECK_THROWS_AS(aot_loss(theta, theta, empty, PenaltyFn::logistic(1.0), SortMode::Hard),
                    std::domain_error);
    PreferenceBatch lop;
    lop.mode = PreferenceMode::Unpaired;
    lop.unpaired_pos = {{0, 0}, {1, 1}};
    lop.unpaired_neg = {{0, 1}};
    CHECK_THROWS_AS(aot_loss(theta, theta, lop, PenaltyFn::logistic(1.0), SortMode::Hard),
                    std::domain_error);
    const auto batch = random_batch(2, 3, 4, PreferenceMode::Paired, rng);
    CHECK_THROWS_AS(aot_loss(theta, theta, batch, PenaltyFn::zero_one(), SortMode::Hard),
                    std::invalid_argument);
    CHECK_THROWS_AS(dpo_loss(theta, theta, lop, 1.0), std::domain_error);
    CHECK_THROWS_AS(ipo_loss(theta, theta, lop, 1.0), std::domain_error);
}

TEST_CASE("dpo at theta == ref is log 2 and saturates to zero for large margins") {
    std::mt19937_64 rng(3);
    const auto theta = random_policy(3, 4, rng);
    const auto batch = random_batch(3, 4, 5, PreferenceMode::Paired, rng);
    CHECK(dpo_loss(theta, theta, batch, 0.7).value == Catch::Approx(std::log(2.0)).margin(1e-14));

    TabularPolicy sep(1, 2, {25.0, -25.0}, 30.0);
    TabularPolicy ref(1, 2);
    PreferenceBatch one;
    one.mode = PreferenceMode::Paired;
    one.paired = {{0, 0, 1}};
    CHECK(dpo_loss(sep, ref, one, 1.0).value == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("ipo hits zero exactly at the target margin and beta^2 at theta == ref") {
    TabularPolicy ref(1, 2);
    const double beta = 0.35;
    TabularPolicy theta(1, 2, {beta / 2, -beta / 2}, 30.0);
    PreferenceBatch one;
    one.mode = PreferenceMode::Paired;
    one.paired = {{0, 0, 1}};
    CHECK(ipo_loss(theta, ref, one, beta).value == Catch::Approx(0.0).margin(1e-14));
    CHECK(ipo_loss(ref, ref, one, beta).value == Catch::Approx(beta * beta).margin(1e-15));
}

TEST_CASE("singleton batches reduce aot to dpo and ipo exactly") {
    std::mt19937_64 rng(44);
    for (int t = 0; t < 100; ++t) {
        const std::size_t k = 2 + rng() % 3, m = 2 + rng() % 4;
        const auto theta = random_policy(k, m, rng);
        const auto ref = random_policy(k, m, rng);
        const auto batch = random_batch(k, m, 1, PreferenceMode::Paired, rng);
        const double beta = 0.01 + 2.0 * (static_cast<double>(rng() % 1000) / 1000.0);

        const auto viaAot = aot_loss(theta, ref, batch, PenaltyFn::logistic(beta), SortMode::Hard);
        const auto viaDpo = dpo_loss(theta, ref, batch, beta);
        REQUIRE(std::fabs(viaAot.value - viaDpo.value) <= 1e-12);
        for (std::size_t i = 0; i < viaAot.grad.size(); ++i)
            REQUIRE(std::fabs(viaAot.grad[i] - viaDpo.grad[i]) <= 1e-12);

        const auto viaAotLs = aot_loss(theta, ref, batch, PenaltyFn::least_squares(beta), SortMode::Hard);
        const auto viaIpo = ipo_loss(theta, ref, batch, beta);
        REQUIRE(std::fabs(viaAotLs.value - viaIpo.value) <= 1e-12);
        for (std::size_t i = 0; i < viaAotLs.grad.size(); ++i)
            REQUIRE(std::fabs(viaAotLs.grad[i] - viaIpo.grad[i]) <= 1e-12);
    }
}

TEST_CASE("hard-sort loss and gradient are exactly batch-order invariant") {
    std::mt19937_64 rng(55);
    const auto theta = random_policy(3, 4, rng);
    const auto ref = random_policy(3, 4, rng);
    auto batch = random_batch(3, 4, 8, PreferenceMode::Unpaired, rng);
    const auto h = PenaltyFn::logistic(0.01);
    const auto base = aot_loss(theta, ref, batch, h, SortMode::Hard);
    for (int t = 0; t < 5; ++t) {
        std::shuffle(batch.unpaired_pos.begin(), batch.unpaired_pos.end(), rng);
        std::shuffle(batch.unpaired_neg.begin(), batch.unpaired_neg.end(), rng);
        const auto out = aot_loss(theta, ref, batch, h, SortMode::Hard);
        CHECK(out.value == base.value);
        CHECK(out.grad == base.grad);
    }
}

TEST_CASE("soft-sort loss is batch-order invariant within tolerance") {
    std::mt19937_64 rng(56);
    const auto theta = random_policy(3, 4, rng);
    const auto ref = random_policy(3, 4, rng);
    auto batch = random_batch(3, 4, 6, PreferenceMode::Unpaired, rng);
    const auto h = PenaltyFn::logistic(1.0);
    const SoftSortConfig soft{0.1, 200, 1e-9};
    const auto base = aot_loss(theta, ref, batch, h, SortMode::Soft, soft);
    for (int t = 0; t < 3; ++t) {
        std::shuffle(batch.unpaired_pos.begin(), batch.unpaired_pos.end(), rng);
        std::shuffle(batch.unpaired_neg.begin(), batch.unpaired_neg.end(), rng);
        const auto out = aot_loss(theta, ref, batch, h, SortMode::Soft, soft);
        CHECK(out.value == Catch::Approx(base.value).margin(1e-10));
        for (std::size_t i = 0; i < base.grad.size(); ++i)
            CHECK(out.grad[i] == Catch::Approx(base.grad[i]).margin(1e-10));
    }
}

TEST_CASE("loss gradients match finite differences across modes, sorts and penalties") {
    std::mt19937_64 rng(314);
    const double step = 1e-5;
    const std::vector<PenaltyFn> hs{PenaltyFn::logistic(1.0), PenaltyFn::squared_hinge(0.01),
                                    PenaltyFn::least_squares(0.3)};
    const SoftSortConfig soft{0.1, 200, 1e-9};
    for (PreferenceMode mode : {PreferenceMode::Paired, PreferenceMode::Unpaired}) {
        for (SortMode sort : {SortMode::Hard, SortMode::Soft}) {
            for (const auto& h : hs) {
                for (int t = 0; t < 3; ++t) {
                    const std::size_t k = 3, m = 4;
                    const auto theta = random_policy(k, m, rng);
                    const auto ref = random_policy(k, m, rng);
                    const auto batch = random_batch(k, m, 8, mode, rng);
                    const auto out = aot_loss(theta, ref, batch, h, sort, soft);
                    for (std::size_t idx = 0; idx < k * m; ++idx) {
                        auto lp = theta.logits();
                        lp[idx] += step;
                        const double fplus =
                            aot_loss(TabularPolicy(k, m, lp), ref, batch, h, sort, soft).value;
                        lp[idx] -= 2 * step;
                        const double fminus =
                            aot_loss(TabularPolicy(k, m, lp), ref, batch, h, sort, soft).value;
                        const double fd = (fplus - fminus) / (2 * step);
                        const double diff = std::fabs(out.grad[idx] - fd);
                        const double rel =
                            diff / std::max({std::fabs(fd), std::fabs(out.grad[idx]), 1e-8});
                        if (diff > 1e-10) REQUIRE(rel <= 1e-4);
                    }
                }
            }
        }
    }
}

TEST_CASE("dpo and ipo gradients match finite differences") {
    std::mt19937_64 rng(315);
    const double step = 1e-5;
    for (int t = 0; t < 10; ++t) {
        const std::size_t k = 3, m = 4;
        const auto theta = random_policy(k, m, rng);
        const auto ref = random_policy(k, m, rng);
        const auto batch = random_batch(k, m, 7, PreferenceMode::Paired, rng);
        for (bool use_dpo : {true, false}) {
            const auto out = use_dpo ? dpo_loss(theta, ref, batch, 0.8) : ipo_loss(theta, ref, batch, 0.8);
            for (std::size_t idx = 0; idx < k * m; ++idx) {
                auto lp = theta.logits();
                lp[idx] += step;
                const TabularPolicy tp(k, m, lp);
                lp[idx] -= 2 * step;
                const TabularPolicy tm(k, m, lp);
                const double fplus = use_dpo ? dpo_loss(tp, ref, batch, 0.8).value
                                             : ipo_loss(tp, ref, batch, 0.8).value;
                const double fminus = use_dpo ? dpo_loss(tm, ref, batch, 0.8).value
                                              : ipo_loss(tm, ref, batch, 0.8).value;
                const double fd = (fplus - fminus) / (2 * step);
                const double diff = std::fabs(out.grad[idx] - fd);
                if (diff > 1e-10)
                    REQUIRE(diff / std::max({std::fabs(fd), std::fabs(out.grad[idx]), 1e-8}) <= 1e-4);
            }
        }
    }
}

TEST_CASE("zero squared-hinge loss certifies empirical dominance of the reward measures") {
    // a policy that pushes chosen responses far above rejected ones
    TabularPolicy theta(2, 2, {8.0, -8.0, 8.0, -8.0}, 30.0);
    TabularPolicy ref(2, 2);
    PreferenceBatch batch;
    batch.mode = PreferenceMode::Unpaired;
    batch.unpaired_pos = {{0, 0}, {1, 0}, {0, 0}};
    batch.unpaired_neg = {{0, 1}, {1, 1}, {1, 1}};
    const auto out = aot_loss(theta, ref, batch, PenaltyFn::squared_hinge(0.0), SortMode::Hard);
    REQUIRE(out.value == 0.0);

    std::vector<double> u, v;
    for (const auto& it : batch.unpaired_pos) u.push_back(reward_unpaired(theta, ref, it.x, it.y).value);
    for (const auto& it : batch.unpaired_neg) v.push_back(reward_unpaired(theta, ref, it.x, it.y).value);
    CHECK(check_fsd(EmpiricalMeasure(u), EmpiricalMeasure(v)).fsd_holds);
}

TEST_CASE("minibatch gradient bias shrinks as batches grow") {
    const std::size_t N = 4096;
    const auto h = PenaltyFn::logistic(0.01);
    std::vector<double> bias_by_level(3, 0.0);
    const std::vector<std::size_t> levels{8, 64, 512};
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        std::mt19937_64 rng(seed);
        const auto theta = random_policy(4, 8, rng);
        const TabularPolicy ref(4, 8);
        const auto data = generate(4, 8, N, PreferenceMode::Unpaired, 0.5, seed);

        PreferenceBatch full;
        full.mode = PreferenceMode::Unpaired;
        full.unpaired_pos = data.unpaired_pos;
        full.unpaired_neg = data.unpaired_neg;
        const auto G = aot_loss(theta, ref, full, h, SortMode::Hard).grad;

        for (std::size_t li = 0; li < levels.size(); ++li) {
            const std::size_t b = levels[li];
            std::vector<std::size_t> perm_u(N), perm_v(N);
            std::iota(perm_u.begin(), perm_u.end(), 0);
            std::iota(perm_v.begin(), perm_v.end(), 0);
            std::shuffle(perm_u.begin(), perm_u.end(), rng);
            std::shuffle(perm_v.begin(), perm_v.end(), rng);
            std::vector<double> mean(G.size(), 0.0);
            const std::size_t nb = N / b;
            for (std::size_t bi = 0; bi < nb; ++bi) {
                PreferenceBatch mb;
                mb.mode = PreferenceMode::Unpaired;
                for (std::size_t i = 0; i < b; ++i) {
                    mb.unpaired_pos.push_back(data.unpaired_pos[perm_u[bi * b + i]]);
                    mb.unpaired_neg.push_back(data.unpaired_neg[perm_v[bi * b + i]]);
                }
                const auto g = aot_loss(theta, ref, mb, h, SortMode::Hard).grad;
                for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += g[j] / static_cast<double>(nb);
            }
            double dist = 0.0;
            for (std::size_t j = 0; j < mean.size(); ++j)
                dist += (mean[j] - G[j]) * (mean[j] - G[j]);
            bias_by_level[li] += std::sqrt(dist) / 3.0;
        }
    }
    REQUIRE(bias_by_level[0] >= bias_by_level[1]);
    REQUIRE(bias_by_level[1] >= bias_by_level[2]);
}
