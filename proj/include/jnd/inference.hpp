#pragma once

// Maximum-likelihood estimation of the content and subject factors from a
// JND matrix, Wald / bootstrap confidence intervals, and the MOS baseline.

#include "jnd/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace jnd {

struct FitConfig {
    int max_iterations = 500;
    /// Relative change of the negative log-likelihood that ends the sweeps.
    double tolerance = 1e-9;
    /// Lower bound on v_c^2 and v_s^2, QP^2.
    double variance_floor = 1e-4;
    /// Perturbed restarts in addition to the canonical initialization.
    int restarts = 3;
    std::uint64_t seed = 0;
    /// Subject resamples used when the Wald intervals are unavailable.
    int bootstrap_resamples = 500;

    void validate() const;
};

enum class CiMethod { Wald, Bootstrap };

std::string_view to_string(CiMethod method);

struct FitResult {
    ModelParams params;
    double log_likelihood = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> ci95_y;
    std::vector<double> ci95_b;
    CiMethod ci_method = CiMethod::Wald;
    /// Negative log-likelihood after initialization and after every sweep
    /// of the selected run.
    std::vector<double> objective_trace;
    std::vector<std::string> warnings;
};

struct MosEstimate {
    std::vector<double> mean;
    std::vector<double> ci95;
    std::vector<std::size_t> n;
};

struct ConfidenceIntervals {
    std::vector<double> ci95_y;
    std::vector<double> ci95_b;
};

/// Gradient of the negative log-likelihood in the solver's coordinates:
/// locations y and b directly, deviations through log v_c^2 and log v_s^2.
struct NllGradient {
    std::vector<double> y;
    std::vector<double> b;
    std::vector<double> log_var_c;
    std::vector<double> log_var_s;
};

/// -sum over observed cells of log N(Y[c][s]; y[c] + b[s], v_c[c]^2 + v_s[s]^2).
double negative_log_likelihood(const JndMatrix& matrix, const ModelParams& params);

NllGradient nll_gradient(const JndMatrix& matrix, const ModelParams& params);

/// Closed-form maximizer of the likelihood over y with b and the deviations
/// held fixed: the inverse-variance weighted row mean of Y - b.
std::vector<double> optimal_content_locations(const JndMatrix& matrix, const ModelParams& params);

FitResult fit_mle(const JndMatrix& matrix, const FitConfig& config = {});

/// 95% Wald half-widths from the observed information of the location block
/// (y, b) under the zero-mean-bias gauge. Throws SingularInformation when the
/// gauge-reduced block is not positive definite.
ConfidenceIntervals confidence_intervals(const JndMatrix& matrix, const ModelParams& params);

/// Percentile bootstrap over subjects; half-width is half the 2.5..97.5%
/// range of the refitted estimates.
ConfidenceIntervals bootstrap_intervals(const JndMatrix& matrix, const FitConfig& config);

/// Per-content sample mean with 1.96 * sd / sqrt(n) half-widths.
MosEstimate mos_estimate(const JndMatrix& matrix);

}  // namespace jnd
