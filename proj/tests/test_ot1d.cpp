#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "aot/dominance.hpp"
#include "aot/empirical_measure.hpp"
#include "aot/ot1d.hpp"
#include "lp_oracle.hpp"

using namespace aot;

namespace {

std::vector<PenaltyFn> convex_kinds() {
    return {PenaltyFn::hinge(), PenaltyFn::squared_hinge(0.01), PenaltyFn::logistic(1.0),
            PenaltyFn::least_squares(0.3)};
}

}  // namespace

TEST_CASE("ot_sorted on identical multisets is h(0)-free for zero-margin hinges") {
    const auto h = PenaltyFn::squared_hinge(0.0);
    CHECK(ot_sorted({2.0, -1.0, 0.5}, {0.5, 2.0, -1.0}, h).cost == 0.0);
}

TEST_CASE("ot_sorted pairs order statistics") {
    const auto r = ot_sorted({3.0, 1.0, 2.0}, {2.5, 0.0, 1.0}, PenaltyFn::hinge());
    CHECK(r.sorted_diffs == std::vector<double>{1.0, 1.0, 0.5});
}

TEST_CASE("ot_sorted equals the exhaustive assignment minimum (Monge by sorting)") {
    const std::vector<double> u{3.0, 1.0, 2.0}, v{2.5, 0.0, 1.0};
    const auto h = PenaltyFn::logistic(1.0);
    CHECK(ot_sorted(u, v, h).cost == Catch::Approx(ot_bruteforce(u, v, h)).margin(1e-15));
}

TEST_CASE("ot_sorted validates lengths and finiteness") {
    CHECK_THROWS_AS(ot_sorted({1.0}, {1.0, 2.0}, PenaltyFn::hinge()), std::invalid_argument);
    CHECK_THROWS_AS(ot_sorted({}, {}, PenaltyFn::hinge()), std::invalid_argument);
    CHECK_THROWS_AS(ot_sorted({std::numeric_limits<double>::infinity()}, {1.0}, PenaltyFn::hinge()),
                    std::domain_error);
}

TEST_CASE("sorted solution matches brute force on 200 random instances per penalty") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> val(-5.0, 5.0);
    for (const auto& h : convex_kinds()) {
        double worst = 0.0;
        for (int t = 0; t < 200; ++t) {
            const std::size_t n = 2 + rng() % 6;
            std::vector<double> u(n), v(n);
            for (auto& x : u) x = val(rng);
            for (auto& x : v) x = val(rng);
            worst = std::max(worst, std::fabs(ot_sorted(u, v, h).cost - ot_bruteforce(u, v, h)));
        }
        REQUIRE(worst <= 1e-12);
    }
}

TEST_CASE("ot_sorted is exactly permutation invariant") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> val(-5.0, 5.0);
    std::vector<double> u(11), v(11);
    for (auto& x : u) x = val(rng);
    for (auto& x : v) x = val(rng);
    const auto h = PenaltyFn::logistic(0.7);
    const double base = ot_sorted(u, v, h).cost;
    for (int t = 0; t < 10; ++t) {
        std::shuffle(u.begin(), u.end(), rng);
        std::shuffle(v.begin(), v.end(), rng);
        CHECK(ot_sorted(u, v, h).cost == base);
    }
}

TEST_CASE("ot_sorted is translation invariant") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> val(-5.0, 5.0);
    std::vector<double> u(9), v(9);
    for (auto& x : u) x = val(rng);
    for (auto& x : v) x = val(rng);
    const auto h = PenaltyFn::squared_hinge(0.01);
    const double base = ot_sorted(u, v, h).cost;
    for (double c : {-7.5, 0.25, 3.0}) {
        auto us = u, vs = v;
        for (auto& x : us) x += c;
        for (auto& x : vs) x += c;
        CHECK(ot_sorted(us, vs, h).cost == Catch::Approx(base).margin(1e-12));
    }
}

TEST_CASE("raising any u sample weakly lowers the cost for nonincreasing penalties") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> val(-5.0, 5.0);
    std::uniform_real_distribution<double> bump(0.0, 3.0);
    for (const auto& h : {PenaltyFn::hinge(), PenaltyFn::squared_hinge(0.01), PenaltyFn::logistic(1.0)}) {
        for (int t = 0; t < 100; ++t) {
            const std::size_t n = 2 + rng() % 6;
            std::vector<double> u(n), v(n);
            for (auto& x : u) x = val(rng);
            for (auto& x : v) x = val(rng);
            const double before = ot_sorted(u, v, h).cost;
            u[rng() % n] += bump(rng);
            REQUIRE(ot_sorted(u, v, h).cost <= before + 1e-15);
        }
    }
}

TEST_CASE("ot_weighted of a measure with itself is h(0) on the diagonal blocks") {
    const auto m = EmpiricalMeasure::from_pairs({{0.0, 0.25}, {1.0, 0.75}});
    const auto h = PenaltyFn::logistic(2.0);
    const auto r = ot_weighted(m, m, h);
    CHECK(r.cost == Catch::Approx(h.eval(0.0)).margin(1e-15));
    for (const auto& e : r.plan.entries) CHECK(e.index_u == e.index_v);
}

TEST_CASE("hand-derived weighted case: uniform {0,2} vs point mass at 1") {
    const EmpiricalMeasure mu({0.0, 2.0});
    const EmpiricalMeasure nu({1.0});
    const auto r = ot_weighted(mu, nu, PenaltyFn::squared_hinge(0.0));
    CHECK(r.cost == 0.5);  // exact: 0.5 * ( -1 )^2_+ + 0.5 * 0
    REQUIRE(r.plan.entries.size() == 2);
    CHECK(r.plan.entries[0].mass == 0.5);
    CHECK(r.plan.entries[1].mass == 0.5);
}

TEST_CASE("uniform equal-n weighted case reduces exactly to ot_sorted") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> val(-5.0, 5.0);
    for (const auto& h : convex_kinds()) {
        for (int t = 0; t < 100; ++t) {
            const std::size_t n = 1 + rng() % 12;
            std::vector<double> u(n), v(n);
            for (auto& x : u) x = val(rng);
            for (auto& x : v) x = val(rng);
            const double ws = ot_weighted(EmpiricalMeasure(u), EmpiricalMeasure(v), h).cost;
            const double ss = ot_sorted(u, v, h).cost;
            REQUIRE(std::fabs(ws - ss) <= 1e-14);
        }
    }
}

TEST_CASE("coupling marginals match the measure weights and stay monotone") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> val(-3.0, 3.0);
    std::uniform_real_distribution<double> wgt(0.05, 1.0);
    for (int t = 0; t < 60; ++t) {
        const std::size_t nu_n = 1 + rng() % 5, nv_n = 1 + rng() % 5;
        std::vector<std::pair<double, double>> up(nu_n), vp(nv_n);
        for (auto& p : up) p = {val(rng), wgt(rng)};
        for (auto& p : vp) p = {val(rng), wgt(rng)};
        const auto mu = EmpiricalMeasure::from_pairs(up);
        const auto nu = EmpiricalMeasure::from_pairs(vp);
        const auto plan = monotone_coupling(mu, nu);

        std::vector<double> row(mu.size(), 0.0), col(nu.size(), 0.0);
        std::size_t last_u = 0, last_v = 0;
        for (const auto& e : plan.entries) {
            REQUIRE(e.mass > 0.0);
            REQUIRE(e.index_u >= last_u);
            REQUIRE(e.index_v >= last_v);
            last_u = e.index_u;
            last_v = e.index_v;
            row[e.index_u] += e.mass;
            col[e.index_v] += e.mass;
        }
        for (std::size_t i = 0; i < mu.size(); ++i)
            REQUIRE(std::fabs(row[i] - mu.weights()[i]) <= 1e-10);
        for (std::size_t j = 0; j < nu.size(); ++j)
            REQUIRE(std::fabs(col[j] - nu.weights()[j]) <= 1e-10);
    }
}

TEST_CASE("ot_weighted agrees with the LP vertex-enumeration oracle on 3x3 instances") {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> val(-3.0, 3.0);
    std::uniform_real_distribution<double> wgt(0.1, 1.0);
    for (const auto& h : convex_kinds()) {
        for (int t = 0; t < 40; ++t) {
            const std::size_t nr = 1 + rng() % 3, nc = 1 + rng() % 3;
            std::vector<std::pair<double, double>> up(nr), vp(nc);
            for (auto& p : up) p = {val(rng), wgt(rng)};
            for (auto& p : vp) p = {val(rng), wgt(rng)};
            const auto mu = EmpiricalMeasure::from_pairs(up);
            const auto nu = EmpiricalMeasure::from_pairs(vp);
            const double lp = aot_test::lp_transport_min(mu.weights(), nu.weights(), mu.atoms(),
                                                         nu.atoms(), h);
            REQUIRE(std::fabs(ot_weighted(mu, nu, h).cost - lp) <= 1e-10);
        }
    }
}

TEST_CASE("brute force oracle edge cases") {
    const auto h = PenaltyFn::least_squares(0.2);
    CHECK(ot_bruteforce({1.5}, {0.5}, h) == h.eval(1.0));
    CHECK(ot_bruteforce({0.0, 1.0}, {0.0, 1.0}, h) == Catch::Approx(h.eval(0.0)).margin(1e-15));
    std::vector<double> big(9, 0.0);
    CHECK_THROWS_AS(ot_bruteforce(big, big, h), std::invalid_argument);
}

TEST_CASE("zero W2 cost characterizes empirical dominance") {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> val(-2.0, 2.0);
    const auto w2 = PenaltyFn::squared_hinge(0.0);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + rng() % 6;
        std::vector<double> u(n), v(n);
        for (auto& x : u) x = val(rng);
        for (auto& x : v) x = val(rng);
        auto su = u, sv = v;
        std::sort(su.begin(), su.end());
        std::sort(sv.begin(), sv.end());
        bool dominates = true;
        for (std::size_t i = 0; i < n; ++i) dominates = dominates && su[i] >= sv[i];
        const bool zero_cost = ot_sorted(u, v, w2).cost == 0.0;
        REQUIRE(zero_cost == dominates);
        REQUIRE(zero_cost == check_fsd(EmpiricalMeasure(u), EmpiricalMeasure(v)).fsd_holds);
    }
}
