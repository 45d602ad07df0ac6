#include "jnd/error.hpp"
#include "jnd/screening.hpp"
#include "jnd/simulator.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace jnd;

TEST_CASE("rejection rule") {
    const ScreeningPolicy policy;
    CHECK_FALSE(rejection_reason(0.5, 1.0, policy).has_value());
    CHECK_FALSE(rejection_reason(-0.3, 1.0, policy).has_value());
    CHECK(rejection_reason(6.0, 1.0, policy) == RejectionReason::Bias);
    CHECK(rejection_reason(-4.01, 1.0, policy) == RejectionReason::Bias);
    CHECK_FALSE(rejection_reason(4.0, 3.5, policy).has_value());
    CHECK(rejection_reason(0.0, 3.6, policy) == RejectionReason::Inconsistency);
    CHECK(rejection_reason(5.0, 5.0, policy) == RejectionReason::Both);
    CHECK(to_string(RejectionReason::Both) == "bias+inconsistency");
}

TEST_CASE("ScreeningPolicy::validate") {
    ScreeningPolicy p;
    CHECK_NOTHROW(p.validate());
    p.bias_limit = 0.0;
    CHECK_THROWS_AS(p.validate(), DomainError);
    p = {};
    p.max_rounds = 0;
    CHECK_THROWS_AS(p.validate(), DomainError);
}

TEST_CASE("screening removes the planted outliers") {
    const PanelSpec spec = testing::outlier_panel(5);
    const Session session = run_session(spec);
    const ScreeningResult result = screen_subjects(session.matrix);
    auto rejected = result.rejected_indices();
    std::sort(rejected.begin(), rejected.end());
    CHECK(rejected == testing::planted_columns(spec));
    CHECK(result.retained.n_subjects() == 32);
    CHECK(result.retained_subjects.size() == 32);
    for (const auto& r : result.rejected) {
        CHECK(r.round >= 1);
        CHECK(r.id == session.matrix.subject_ids()[r.subject]);
        CHECK(rejection_reason(r.b, r.v_s, ScreeningPolicy{}) == r.reason);
    }
    CHECK(result.final_fit.params.b.size() == 32);
}

TEST_CASE("well-behaved panel loses nobody") {
    PanelSpec spec;
    spec.n_contents = 15;
    spec.n_subjects = 20;
    spec.b = {-1.0, 1.0};
    spec.v_s = {0.2, 1.0};
    spec.seed = 8;
    const ScreeningResult result = screen_subjects(sample_panel(spec).latent);
    CHECK(result.rejected.empty());
    CHECK(result.rounds == 1);
    CHECK(result.retained == sample_panel(spec).latent);
}

TEST_CASE("screening is idempotent on its retained matrix") {
    const ScreeningResult first = screen_subjects(run_session(testing::outlier_panel(6)).matrix);
    const ScreeningResult second = screen_subjects(first.retained);
    CHECK(second.rejected.empty());
}

TEST_CASE("screening does not depend on subject order") {
    const Session session = run_session(testing::outlier_panel(7));
    std::vector<std::size_t> order(37);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), std::mt19937_64(99));
    const auto permuted = session.matrix.select_subjects(order);

    const auto a = screen_subjects(session.matrix);
    const auto b = screen_subjects(permuted);
    std::vector<std::string> ids_a;
    std::vector<std::string> ids_b;
    for (const auto& r : a.rejected) ids_a.push_back(r.id);
    for (const auto& r : b.rejected) ids_b.push_back(r.id);
    std::sort(ids_a.begin(), ids_a.end());
    std::sort(ids_b.begin(), ids_b.end());
    CHECK(ids_a == ids_b);
}

TEST_CASE("rejecting everyone is an error") {
    const auto m = JndMatrix::from_rows({{10, 20, 30, 40}, {12, 22, 33, 41}, {9, 21, 31, 42}});
    ScreeningPolicy strict;
    strict.bias_limit = 0.01;
    strict.inconsistency_limit = 0.01;
    CHECK_THROWS_AS(screen_subjects(m, strict), InsufficientData);
}

TEST_CASE("segment_groups examples") {
    ModelParams p{{30.0}, {1.0}, {-4.0, 0.0, 4.0}, {2.0, 2.0, 2.0}};
    const auto seg = segment_groups(p);
    REQUIRE(seg.groups.size() == 3);
    CHECK(seg.groups[0].name == "HS");
    CHECK(seg.groups[0].members == std::vector<std::size_t>{0});
    CHECK(seg.groups[1].name == "NS");
    CHECK(seg.groups[1].members == std::vector<std::size_t>{1});
    CHECK(seg.groups[2].name == "ES");
    CHECK(seg.groups[2].members == std::vector<std::size_t>{2});
    CHECK(seg.groups[2].bias_summary.mean == 4.0);
    CHECK(seg.notes.empty());

    ModelParams flat{{30.0}, {1.0}, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
    const auto single = segment_groups(flat);
    REQUIRE(single.groups.size() == 1);
    CHECK(single.groups[0].name == "NS");
    CHECK(single.notes.size() == 2);

    CHECK_THROWS_AS(segment_groups(p, {1.0, 1.0}), DomainError);
    CHECK_THROWS_AS(segment_groups(p, {2.0, -2.0}), DomainError);
}

TEST_CASE("groups partition the subjects and are ordered by bias") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (int trial = 0; trial < 20; ++trial) {
        ModelParams p{{30.0}, {1.0}, {}, {}, Gauge::None};
        for (int s = 0; s < 40; ++s) {
            p.b.push_back(u(rng));
            p.v_s.push_back(1.0);
        }
        const double lo = u(rng);
        const GroupCuts cuts{lo, lo + 0.5 + std::abs(u(rng))};
        const auto seg = segment_groups(p, cuts);
        std::vector<int> seen(40, 0);
        for (const auto& g : seg.groups) {
            CHECK_FALSE(g.members.empty());
            for (auto s : g.members) ++seen[s];
        }
        for (int count : seen) CHECK(count == 1);
        for (std::size_t k = 1; k < seg.groups.size(); ++k)
            CHECK(seg.groups[k - 1].bias_summary.mean < seg.groups[k].bias_summary.mean);
    }
}

TEST_CASE("tertile cuts split a uniform draw evenly") {
    PanelSpec spec;
    spec.n_contents = 1;
    spec.n_subjects = 300;
    spec.seed = 31;
    const auto truth = sample_panel(spec).truth;
    const auto seg = segment_groups(truth, tertile_cuts(truth));
    REQUIRE(seg.groups.size() == 3);
    for (const auto& g : seg.groups) CHECK(g.members.size() == 100);

    ModelParams tied{{30.0}, {1.0}, {0.0, 0.0, 0.0, 0.0}, {1.0, 1.0, 1.0, 1.0}};
    CHECK_THROWS_AS(tertile_cuts(tied), DomainError);
}

TEST_CASE("group_params") {
    ModelParams p{{30.0}, {1.0}, {-2.0, 2.0, 1.0}, {2.0, 2.0, 3.0}, Gauge::None};
    const auto one = group_params(p, make_group(p, "one", {2}));
    CHECK(one.b == 1.0);
    CHECK(one.v_s == 3.0);
    const auto pair = group_params(p, make_group(p, "pair", {0, 1}));
    CHECK(pair.b == 0.0);
    CHECK(pair.v_s == 2.0);
    const auto rms = group_params(p, make_group(p, "rms", {1, 2}));
    CHECK(rms.v_s == doctest::Approx(std::sqrt(6.5)));
    CHECK_THROWS(make_group(p, "empty", {}));

    const auto all = all_subjects_group(p);
    CHECK(all.name == "ALL");
    CHECK(all.members.size() == 3);

    ModelParams fig5{{31.7, 30.39}, {3.962, 1.326}, {-4.0, 0.0, 4.0}, {2.0, 2.0, 2.0}};
    const auto seg = segment_groups(fig5);
    const auto ns = group_params(fig5, seg.groups[1]);
    CHECK(ns.b == 0.0);
    CHECK(ns.v_s == 2.0);
}
