#include "jnd/simulator.hpp"

#include "jnd/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>
#include <string>

namespace jnd {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Uniform on [0, 1) from the top 53 bits.
double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(Rng& rng, const Range& r) { return r.lo + (r.hi - r.lo) * uniform01(rng); }

// Box-Muller, cosine branch only, so every draw consumes exactly two words.
double standard_normal(Rng& rng) {
    const double u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void check_range(const Range& r, const char* name, double min, double max) {
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi || r.lo < min || r.hi > max) {
        throw DomainError(std::string("invalid ") + name + " range [" + std::to_string(r.lo) + ", " +
                          std::to_string(r.hi) + "]");
    }
}

}  // namespace

Rng substream(std::uint64_t seed, RandomStream stream, std::uint64_t content, std::uint64_t subject) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
    h = splitmix64(h ^ content);
    h = splitmix64(h ^ subject);
    return Rng(h);
}

std::string_view to_string(ResponseMode mode) {
    return mode == ResponseMode::FixedThreshold ? "fixed" : "per-comparison";
}

ResponseMode response_mode_from_string(std::string_view text) {
    if (text == "fixed" || text == "fixed-threshold") return ResponseMode::FixedThreshold;
    if (text == "per-comparison") return ResponseMode::PerComparison;
    throw DomainError("unknown response mode '" + std::string(text) + "'");
}

void PanelSpec::validate() const {
    if (n_contents < 1 || n_subjects < 1) throw DomainError("panel needs at least one content and one subject");
    constexpr double inf = std::numeric_limits<double>::max();
    check_range(y, "y", kMinQp, kMaxQp);
    check_range(v_c, "v_c", 0.0, inf);
    check_range(b, "b", -inf, inf);
    check_range(v_s, "v_s", 0.0, inf);
    if (!(comparison_sigma >= 0.0)) throw DomainError("comparison sigma must be >= 0");
    if (anchor < kMinQp || anchor >= kMaxQp) throw DomainError("anchor must lie in [0, 50]");
    for (const auto& p : planted) {
        if (p.subject >= n_subjects) throw DomainError("planted subject index out of range");
        if (!std::isfinite(p.b) || !(p.v_s >= 0.0)) throw DomainError("planted subject factors are invalid");
    }
}

PanelSample sample_panel(const PanelSpec& spec) {
    spec.validate();
    const std::size_t n_c = spec.n_contents;
    const std::size_t n_s = spec.n_subjects;

    ModelParams truth;
    truth.y.resize(n_c);
    truth.v_c.resize(n_c);
    truth.b.resize(n_s);
    truth.v_s.resize(n_s);
    Rng params_rng = substream(spec.seed, RandomStream::Params);
    for (auto& v : truth.y) v = uniform(params_rng, spec.y);
    for (auto& v : truth.v_c) v = uniform(params_rng, spec.v_c);
    for (auto& v : truth.b) v = uniform(params_rng, spec.b);
    for (auto& v : truth.v_s) v = uniform(params_rng, spec.v_s);
    for (const auto& p : spec.planted) {
        truth.b[p.subject] = p.b;
        truth.v_s[p.subject] = p.v_s;
    }
    const double mean_b = std::accumulate(truth.b.begin(), truth.b.end(), 0.0) / static_cast<double>(n_s);
    for (auto& v : truth.b) v -= mean_b;
    truth.gauge = Gauge::MeanBiasZero;

    PanelSample sample{truth, JndMatrix(n_c, n_s), std::vector<unsigned char>(n_c * n_s, 0)};
    for (std::size_t c = 0; c < n_c; ++c) {
        for (std::size_t s = 0; s < n_s; ++s) {
            Rng cell_rng = substream(spec.seed, RandomStream::Cell, c, s);
            const double sigma = std::sqrt(truth.v_c[c] * truth.v_c[c] + truth.v_s[s] * truth.v_s[s]);
            const double draw = truth.y[c] + truth.b[s] + sigma * standard_normal(cell_rng);
            const double clamped = std::clamp(draw, static_cast<double>(kMinQp), static_cast<double>(kMaxQp));
            sample.clamped[c * n_s + s] = clamped != draw;
            sample.latent.set(c, s, clamped);
        }
    }
    return sample;
}

bool subject_decision(double latent_threshold, QpIndex probe, ResponseMode mode, double comparison_sigma, Rng& rng) {
    double threshold = latent_threshold;
    if (mode == ResponseMode::PerComparison) threshold += comparison_sigma * standard_normal(rng);
    return probe.value() >= threshold;
}

BisectionTrace bisection_search(double latent_threshold, QpIndex anchor, ResponseMode mode, double comparison_sigma,
                                Rng& rng) {
    if (anchor.value() >= kMaxQp) throw DomainError("bisection anchor must be below 51");
    BisectionTrace trace;
    trace.anchor = anchor.value();
    trace.comparisons.reserve(kBisectionRounds);
    int lo = anchor.value();
    int hi = kMaxQp;
    bool any_noticeable = false;
    for (int round = 0; round < kBisectionRounds; ++round) {
        const int probe = (lo + hi + 1) / 2;
        const bool noticeable = subject_decision(latent_threshold, QpIndex(probe), mode, comparison_sigma, rng);
        trace.comparisons.push_back({probe, noticeable});
        if (noticeable) {
            hi = probe;
            any_noticeable = true;
        } else {
            // A repeat probe of hi (unit bracket, per-comparison noise) cannot
            // push lo onto hi.
            lo = std::min(probe, hi - 1);
        }
    }
    trace.result = hi;
    trace.saturated = !any_noticeable;
    return trace;
}

Session run_session(const PanelSpec& spec) {
    PanelSample panel = sample_panel(spec);
    const std::size_t n_c = spec.n_contents;
    const std::size_t n_s = spec.n_subjects;
    JndMatrix matrix(n_c, n_s);
    std::vector<BisectionTrace> traces;
    traces.reserve(n_c * n_s);
    const QpIndex anchor(spec.anchor);
    for (std::size_t c = 0; c < n_c; ++c) {
        for (std::size_t s = 0; s < n_s; ++s) {
            Rng rng = substream(spec.seed, RandomStream::Comparison, c, s);
            auto trace = bisection_search(panel.latent.at(c, s), anchor, spec.mode, spec.comparison_sigma, rng);
            matrix.set(c, s, trace.result);
            traces.push_back(std::move(trace));
        }
    }
    ModelParams truth = panel.truth;
    return {std::move(matrix), std::move(truth), std::move(panel), std::move(traces)};
}

}  // namespace jnd
