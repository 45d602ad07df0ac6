#pragma once

// Synthetic viewer panels drawn from the JND generative model, and the
// six-round bisection search that turns a latent threshold into a measured
// JND location.
//
// Random stream layout (each stream is a std::mt19937_64 seeded from
// splitmix64(seed, stream, content, subject)):
//   params      draws y[0..C), v_c[0..C), b[0..S), v_s[0..S) in that order
//   cell        one standard normal per cell for its latent threshold
//   comparison  per-comparison response noise for one cell's search

#include "jnd/model.hpp"

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace jnd {

using Rng = std::mt19937_64;

enum class RandomStream : std::uint64_t { Params = 1, Cell = 2, Comparison = 3 };

/// Independent generator for one (stream, content, subject) slot.
Rng substream(std::uint64_t seed, RandomStream stream, std::uint64_t content = 0, std::uint64_t subject = 0);

enum class ResponseMode {
    FixedThreshold,  ///< noticeable iff probe >= latent threshold
    PerComparison,   ///< threshold jittered by fresh N(0, sigma^2) on every comparison
};

std::string_view to_string(ResponseMode mode);
ResponseMode response_mode_from_string(std::string_view text);

struct Range {
    double lo;
    double hi;
};

/// Subject whose factors are forced instead of drawn (outlier planting).
struct PlantedSubject {
    std::size_t subject;
    double b;
    double v_s;
};

struct PanelSpec {
    std::size_t n_contents = 15;
    std::size_t n_subjects = 32;
    Range y{20.0, 40.0};
    Range v_c{0.5, 4.0};
    Range b{-4.0, 4.0};
    Range v_s{0.0, 3.5};
    std::uint64_t seed = 0;
    ResponseMode mode = ResponseMode::FixedThreshold;
    double comparison_sigma = 0.0;
    /// Anchor clip of the search; 0 for the first JND.
    int anchor = 0;
    std::vector<PlantedSubject> planted;

    void validate() const;
};

struct PanelSample {
    ModelParams truth;
    /// Latent thresholds clamped to [0, 51].
    JndMatrix latent;
    /// Row-major flags for cells whose draw fell outside [0, 51].
    std::vector<unsigned char> clamped;
};

/// Draws factors uniformly from the PanelSpec ranges, applies planted subjects,
/// shifts b to zero mean, then draws each latent threshold from
/// N(y + b, v_c^2 + v_s^2).
PanelSample sample_panel(const PanelSpec& spec);

bool subject_decision(double latent_threshold, QpIndex probe, ResponseMode mode, double comparison_sigma, Rng& rng);

struct Comparison {
    int probe;
    bool noticeable;
};

/// Bracket (lo, hi] starts at (anchor, 51]; each round probes
/// ceil((lo + hi) / 2), a noticeable answer sets hi, otherwise lo. The result
/// after six rounds is hi. Once the bracket is one QP wide the probe repeats
/// hi, and an unnoticed repeat leaves the bracket as it is.
inline constexpr std::string_view kBisectionConvention =
    "bracket=(anchor,51] probe=ceil((lo+hi)/2) noticeable->hi=probe else lo=min(probe,hi-1) rounds=6 result=hi";
inline constexpr int kBisectionRounds = 6;

struct BisectionTrace {
    int anchor = 0;
    std::vector<Comparison> comparisons;
    double result = 0.0;
    /// No probe was noticeable, so the result sits at the top of the ladder.
    bool saturated = false;
};

BisectionTrace bisection_search(double latent_threshold, QpIndex anchor, ResponseMode mode, double comparison_sigma,
                                Rng& rng);

struct Session {
    JndMatrix matrix;
    ModelParams truth;
    PanelSample panel;
    /// Row-major, one per cell.
    std::vector<BisectionTrace> traces;
};

Session run_session(const PanelSpec& spec);

}  // namespace jnd
