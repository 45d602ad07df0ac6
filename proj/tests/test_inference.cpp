#include "jnd/error.hpp"
#include "jnd/inference.hpp"
#include "jnd/simulator.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace jnd;
using jnd::testing::rmse;

namespace {

PanelSpec panel(std::size_t contents, std::size_t subjects, std::uint64_t seed) {
    PanelSpec spec;
    spec.n_contents = contents;
    spec.n_subjects = subjects;
    spec.v_s = {0.5, 3.5};
    spec.seed = seed;
    return spec;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

ModelParams random_params(std::size_t n_c, std::size_t n_s, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> loc(-3.0, 3.0);
    std::uniform_real_distribution<double> dev(0.5, 3.0);
    ModelParams p;
    p.gauge = Gauge::None;
    for (std::size_t c = 0; c < n_c; ++c) {
        p.y.push_back(30.0 + loc(rng));
        p.v_c.push_back(dev(rng));
    }
    for (std::size_t s = 0; s < n_s; ++s) {
        p.b.push_back(loc(rng));
        p.v_s.push_back(dev(rng));
    }
    return p;
}

}  // namespace

TEST_CASE("negative_log_likelihood examples") {
    const auto m = JndMatrix::from_rows({{30.0}});
    ModelParams p{{30.0}, {0.0}, {0.0}, {2.0}};
    CHECK(negative_log_likelihood(m, p) == doctest::Approx(1.612085713764618).epsilon(1e-14));

    JndMatrix empty(2, 2);
    ModelParams p2{{30.0, 31.0}, {1.0, 1.0}, {0.0, 0.0}, {1.0, 1.0}};
    CHECK(negative_log_likelihood(empty, p2) == 0.0);

    ModelParams wrong{{30.0}, {1.0}, {0.0, 0.0}, {1.0, 1.0}};
    CHECK_THROWS_AS(negative_log_likelihood(empty, wrong), DimensionMismatch);
    ModelParams degenerate{{30.0}, {0.0}, {0.0}, {0.0}};
    CHECK_THROWS_AS(negative_log_likelihood(m, degenerate), DegenerateVariance);
}

TEST_CASE("likelihood is invariant under the location shift") {
    const auto sample = sample_panel(panel(6, 9, 3));
    const ModelParams base = sample.truth;
    const double reference = negative_log_likelihood(sample.latent, base);
    for (double delta : {1.0, -1.0, 10.0, -10.0, 0.37}) {
        ModelParams shifted = base;
        shifted.gauge = Gauge::None;
        for (double& y : shifted.y) y += delta;
        for (double& b : shifted.b) b -= delta;
        CHECK(std::abs(negative_log_likelihood(sample.latent, shifted) - reference) <= 1e-12 * std::abs(reference));
    }
}

TEST_CASE("analytic gradient agrees with central differences") {
    const auto sample = sample_panel(panel(4, 6, 5));
    const JndMatrix& m = sample.latent;
    std::mt19937_64 rng(2024);
    const double h = 1e-5;

    auto check = [](double analytic, double numeric) {
        const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        CHECK(std::abs(analytic - numeric) / scale < 1e-4);
    };

    for (int point = 0; point < 20; ++point) {
        const ModelParams p = random_params(m.n_contents(), m.n_subjects(), rng);
        const NllGradient g = nll_gradient(m, p);
        for (std::size_t c = 0; c < p.y.size(); ++c) {
            check(g.y[c], oracle::central_difference(
                              [&](double v) {
                                  ModelParams q = p;
                                  q.y[c] = v;
                                  return negative_log_likelihood(m, q);
                              },
                              p.y[c], h));
            check(g.log_var_c[c], oracle::central_difference(
                                      [&](double l) {
                                          ModelParams q = p;
                                          q.v_c[c] = std::exp(0.5 * l);
                                          return negative_log_likelihood(m, q);
                                      },
                                      2.0 * std::log(p.v_c[c]), h));
        }
        for (std::size_t s = 0; s < p.b.size(); ++s) {
            check(g.b[s], oracle::central_difference(
                              [&](double v) {
                                  ModelParams q = p;
                                  q.b[s] = v;
                                  return negative_log_likelihood(m, q);
                              },
                              p.b[s], h));
            check(g.log_var_s[s], oracle::central_difference(
                                      [&](double l) {
                                          ModelParams q = p;
                                          q.v_s[s] = std::exp(0.5 * l);
                                          return negative_log_likelihood(m, q);
                                      },
                                      2.0 * std::log(p.v_s[s]), h));
        }
    }
}

TEST_CASE("fit_mle objective trace never increases and the gauge holds") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto sample = sample_panel(panel(15, 32, seed));
        const FitResult fit = fit_mle(sample.latent);
        CHECK(fit.converged);
        REQUIRE(fit.objective_trace.size() >= 2);
        for (std::size_t i = 1; i < fit.objective_trace.size(); ++i) {
            const double prev = fit.objective_trace[i - 1];
            CHECK(fit.objective_trace[i] <= prev + 1e-12 * std::abs(prev));
        }
        CHECK(std::abs(mean_of(fit.params.b)) < 1e-9);
        CHECK(fit.params.gauge == Gauge::MeanBiasZero);
        CHECK(fit.log_likelihood == doctest::Approx(-negative_log_likelihood(sample.latent, fit.params)));
        CHECK(fit.ci95_y.size() == 15);
        CHECK(fit.ci95_b.size() == 32);
        CHECK(fit.ci_method == CiMethod::Wald);
    }
}

TEST_CASE("fit_mle recovers planted factors") {
    const auto sample = sample_panel(panel(15, 300, 42));
    const FitResult fit = fit_mle(sample.latent);
    CHECK(fit.converged);
    CHECK(rmse(fit.params.y, sample.truth.y) < 0.5);
    // Even knowing y and every variance, b_s cannot beat 1 / sqrt(sum_c 1/V_cs) with 15 contents.
    double bound = 0.0;
    for (std::size_t s = 0; s < sample.truth.b.size(); ++s) {
        double info = 0.0;
        for (std::size_t c = 0; c < sample.truth.y.size(); ++c)
            info += 1.0 / (sample.truth.v_c[c] * sample.truth.v_c[c] + sample.truth.v_s[s] * sample.truth.v_s[s]);
        bound += 1.0 / info;
    }
    bound = std::sqrt(bound / static_cast<double>(sample.truth.b.size()));
    CHECK(rmse(fit.params.b, sample.truth.b) < 1.25 * bound);
}

TEST_CASE("fit_mle on quantized bisection output tracks the truth up to the ceil offset") {
    const Session session = run_session(panel(15, 300, 42));
    JndMatrix shifted = session.matrix;
    for (std::size_t c = 0; c < shifted.n_contents(); ++c)
        for (std::size_t s = 0; s < shifted.n_subjects(); ++s) shifted.set(c, s, std::max(0.0, shifted.at(c, s) - 0.5));
    const FitResult fit = fit_mle(shifted);
    CHECK(rmse(fit.params.y, session.truth.y) < 0.5);
}

TEST_CASE("recovery error shrinks with panel size") {
    std::vector<double> small;
    std::vector<double> large;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto a = sample_panel(panel(15, 100, 100 + seed));
        const auto b = sample_panel(panel(15, 400, 100 + seed));
        FitConfig config;
        config.restarts = 0;
        small.push_back(rmse(fit_mle(a.latent, config).params.y, a.truth.y));
        large.push_back(rmse(fit_mle(b.latent, config).params.y, b.truth.y));
    }
    std::nth_element(small.begin(), small.begin() + 5, small.end());
    std::nth_element(large.begin(), large.begin() + 5, large.end());
    CHECK(large[5] < small[5]);
}

TEST_CASE("noise-free subjects drive the deviations to the floor") {
    const auto m = JndMatrix::from_rows({{30, 30, 30, 30}, {25, 25, 25, 25}, {40, 40, 40, 40}});
    FitConfig config;
    const FitResult fit = fit_mle(m, config);
    for (double b : fit.params.b) CHECK(std::abs(b) < 1e-6);
    for (double v : fit.params.v_s) CHECK(v * v == doctest::Approx(config.variance_floor).epsilon(1e-6));
    for (double v : fit.params.v_c) CHECK(v * v == doctest::Approx(config.variance_floor).epsilon(1e-6));
    CHECK(fit.params.y[0] == doctest::Approx(30.0));
    CHECK(fit.params.y[1] == doctest::Approx(25.0));
    for (double ci : fit.ci95_y) {
        CHECK(ci > 0.0);
        CHECK(ci <= kZ95 * std::sqrt(2.0 * config.variance_floor));
    }
}

TEST_CASE("fit_mle input checks and warnings") {
    JndMatrix holey(2, 3);
    holey.set(0, 0, 30);
    holey.set(0, 1, 31);
    holey.set(0, 2, 32);
    CHECK_THROWS_AS(fit_mle(holey), InsufficientData);

    holey.set(1, 0, 29);
    JndMatrix no_column = holey;
    for (std::size_t c = 0; c < 2; ++c) no_column.clear(c, 2);
    CHECK_THROWS_AS(fit_mle(no_column), InsufficientData);

    FitConfig bad;
    bad.tolerance = 0.0;
    CHECK_THROWS_AS(fit_mle(holey, bad), DomainError);

    const auto single_row = JndMatrix::from_rows({{28, 30, 32, 33}});
    const FitResult fit = fit_mle(single_row);
    CHECK_FALSE(fit.warnings.empty());
}

TEST_CASE("non-convergence is reported, not thrown") {
    const auto sample = sample_panel(panel(10, 20, 9));
    FitConfig config;
    config.max_iterations = 1;
    config.restarts = 0;
    const FitResult fit = fit_mle(sample.latent, config);
    CHECK_FALSE(fit.converged);
    CHECK(fit.iterations == 1);
}

TEST_CASE("fit_mle does not depend on subject order") {
    const auto sample = sample_panel(panel(8, 12, 21));
    std::vector<std::size_t> order(12);
    std::iota(order.begin(), order.end(), 0);
    std::reverse(order.begin(), order.end());
    const FitResult a = fit_mle(sample.latent);
    const FitResult b = fit_mle(sample.latent.select_subjects(order));
    for (std::size_t c = 0; c < 8; ++c) CHECK(a.params.y[c] == doctest::Approx(b.params.y[c]).epsilon(1e-6));
    for (std::size_t k = 0; k < 12; ++k)
        CHECK(a.params.b[order[k]] == doctest::Approx(b.params.b[k]).epsilon(1e-6).scale(1.0));
}

TEST_CASE("Wald interval reduces to the classical mean interval for one content") {
    const std::size_t n = 25;
    std::vector<double> row(n);
    for (std::size_t s = 0; s < n; ++s) row[s] = 28.0 + 0.2 * static_cast<double>(s);
    const auto m = JndMatrix::from_rows({row});
    ModelParams p{{32.0}, {3.0}, std::vector<double>(n, 0.0), std::vector<double>(n, 4.0)};
    const double sigma = 5.0;
    const auto ci = confidence_intervals(m, p);
    CHECK(ci.ci95_y[0] == doctest::Approx(kZ95 * sigma / std::sqrt(static_cast<double>(n))).epsilon(1e-12));
    for (double h : ci.ci95_b) CHECK(h >= 0.0);
}

TEST_CASE("Wald intervals shrink like one over root S") {
    std::vector<double> ratios;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        PanelSpec spec = panel(15, 100, 300 + seed);
        spec.v_s = {2.0, 2.0};
        spec.v_c = {2.0, 2.0};
        const auto a = sample_panel(spec);
        spec.n_subjects = 200;
        const auto b = sample_panel(spec);
        ratios.push_back(mean_of(fit_mle(b.latent).ci95_y) / mean_of(fit_mle(a.latent).ci95_y));
    }
    CHECK(mean_of(ratios) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.05));
}

TEST_CASE("disconnected design falls back to the bootstrap") {
    JndMatrix m(4, 6);
    const double values[4][6] = {{30, 31, 29, 0, 0, 0}, {25, 27, 26, 0, 0, 0}, {0, 0, 0, 35, 33, 36}, {0, 0, 0, 28, 30, 29}};
    for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t s = 0; s < 6; ++s)
            if ((c < 2) == (s < 3)) m.set(c, s, values[c][s]);

    FitConfig config;
    config.bootstrap_resamples = 0;
    const FitResult point = [&] {
        try {
            fit_mle(m, config);
        } catch (const SingularInformation& e) {
            CHECK_FALSE(e.parameters().empty());
            return FitResult{};
        }
        FAIL("expected SingularInformation");
        return FitResult{};
    }();
    (void)point;

    config.bootstrap_resamples = 60;
    const FitResult fit = fit_mle(m, config);
    CHECK(fit.ci_method == CiMethod::Bootstrap);
    CHECK_FALSE(fit.warnings.empty());
    CHECK(fit.ci95_y.size() == 4);
    for (double h : fit.ci95_y) CHECK(h >= 0.0);
}

TEST_CASE("mos_estimate") {
    const auto m = JndMatrix::from_rows({{28, 30, 32}, {31, 31, 31}});
    const MosEstimate mos = mos_estimate(m);
    CHECK(mos.mean[0] == 30.0);
    CHECK(mos.ci95[0] == doctest::Approx(2.263171468152343).epsilon(1e-14));
    CHECK(mos.mean[1] == 31.0);
    CHECK(mos.ci95[1] == 0.0);
    CHECK(mos.n[0] == 3);

    JndMatrix sparse(1, 3);
    sparse.set(0, 1, 30.0);
    CHECK_THROWS_AS(mos_estimate(sparse), InsufficientData);
}

TEST_CASE("MOS equals the MLE location when subjects are identical and unbiased") {
    const auto sample = sample_panel(panel(6, 10, 77));
    const MosEstimate mos = mos_estimate(sample.latent);
    ModelParams p = sample.truth;
    std::fill(p.b.begin(), p.b.end(), 0.0);
    std::fill(p.v_s.begin(), p.v_s.end(), 1.5);
    const auto y = optimal_content_locations(sample.latent, p);
    for (std::size_t c = 0; c < y.size(); ++c) CHECK(y[c] == doctest::Approx(mos.mean[c]).epsilon(1e-14));
}
