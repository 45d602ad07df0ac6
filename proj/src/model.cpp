#include "jnd/model.hpp"

#include "jnd/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <unordered_set>

namespace jnd {

QpIndex::QpIndex(int value) : value_(value) {
    if (value < kMinQp || value > kMaxQp) {
        throw DomainError("QP index " + std::to_string(value) + " outside [0, 51]");
    }
}

namespace {

std::vector<std::string> default_labels(char prefix, std::size_t n) {
    std::vector<std::string> labels;
    labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) labels.push_back(prefix + std::to_string(i + 1));
    return labels;
}

void require_unique(const std::vector<std::string>& labels, const char* axis) {
    std::unordered_set<std::string> seen;
    for (const auto& label : labels) {
        if (!seen.insert(label).second) {
            throw DomainError(std::string("duplicate ") + axis + " id '" + label + "'");
        }
    }
}

}  // namespace

JndMatrix::JndMatrix(std::size_t n_contents, std::size_t n_subjects)
    : JndMatrix(default_labels('c', n_contents), default_labels('s', n_subjects)) {}

JndMatrix::JndMatrix(std::vector<std::string> content_ids, std::vector<std::string> subject_ids)
    : content_ids_(std::move(content_ids)), subject_ids_(std::move(subject_ids)) {
    if (content_ids_.empty() || subject_ids_.empty()) {
        throw DomainError("JND matrix needs at least one content and one subject");
    }
    require_unique(content_ids_, "content");
    require_unique(subject_ids_, "subject");
    values_.assign(content_ids_.size() * subject_ids_.size(), 0.0);
    mask_.assign(values_.size(), 0);
}

JndMatrix JndMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty() || rows.front().empty()) {
        throw DomainError("JND matrix needs at least one content and one subject");
    }
    JndMatrix matrix(rows.size(), rows.front().size());
    for (std::size_t c = 0; c < rows.size(); ++c) {
        if (rows[c].size() != matrix.n_subjects()) {
            throw DimensionMismatch("row " + std::to_string(c) + " has " + std::to_string(rows[c].size()) +
                                    " entries, expected " + std::to_string(matrix.n_subjects()));
        }
        for (std::size_t s = 0; s < rows[c].size(); ++s) matrix.set(c, s, rows[c][s]);
    }
    return matrix;
}

std::size_t JndMatrix::index(std::size_t c, std::size_t s) const {
    if (c >= n_contents() || s >= n_subjects()) {
        throw DimensionMismatch("cell (" + std::to_string(c) + ", " + std::to_string(s) + ") outside " +
                                std::to_string(n_contents()) + "x" + std::to_string(n_subjects()) + " matrix");
    }
    return c * n_subjects() + s;
}

bool JndMatrix::has(std::size_t c, std::size_t s) const { return mask_[index(c, s)] != 0; }

double JndMatrix::at(std::size_t c, std::size_t s) const {
    const auto i = index(c, s);
    if (!mask_[i]) {
        throw InsufficientData("cell (" + content_ids_[c] + ", " + subject_ids_[s] + ") is missing");
    }
    return values_[i];
}

std::optional<double> JndMatrix::get(std::size_t c, std::size_t s) const {
    const auto i = index(c, s);
    if (!mask_[i]) return std::nullopt;
    return values_[i];
}

void JndMatrix::set(std::size_t c, std::size_t s, double value) {
    const auto i = index(c, s);
    if (!std::isfinite(value) || value < kMinQp || value > kMaxQp) {
        throw DomainError("JND value " + std::to_string(value) + " at (" + content_ids_[c] + ", " +
                          subject_ids_[s] + ") outside [0, 51]");
    }
    values_[i] = value;
    mask_[i] = 1;
}

void JndMatrix::clear(std::size_t c, std::size_t s) {
    const auto i = index(c, s);
    values_[i] = 0.0;
    mask_[i] = 0;
}

std::size_t JndMatrix::observed_in_row(std::size_t c) const {
    std::size_t n = 0;
    for (std::size_t s = 0; s < n_subjects(); ++s) n += mask_[index(c, s)];
    return n;
}

std::size_t JndMatrix::observed_in_column(std::size_t s) const {
    std::size_t n = 0;
    for (std::size_t c = 0; c < n_contents(); ++c) n += mask_[index(c, s)];
    return n;
}

std::size_t JndMatrix::observed() const {
    return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), 1));
}

std::optional<std::size_t> JndMatrix::find_content(std::string_view id) const {
    const auto it = std::find(content_ids_.begin(), content_ids_.end(), id);
    if (it == content_ids_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - content_ids_.begin());
}

JndMatrix JndMatrix::select_subjects(std::span<const std::size_t> subjects) const {
    std::vector<std::string> ids;
    ids.reserve(subjects.size());
    for (auto s : subjects) {
        if (s >= n_subjects()) throw DimensionMismatch("subject index " + std::to_string(s) + " out of range");
        ids.push_back(subject_ids_[s]);
    }
    JndMatrix out(content_ids_, std::move(ids));
    for (std::size_t c = 0; c < n_contents(); ++c) {
        for (std::size_t k = 0; k < subjects.size(); ++k) {
            if (auto v = get(c, subjects[k])) out.set(c, k, *v);
        }
    }
    return out;
}

std::string_view to_string(Gauge gauge) {
    switch (gauge) {
        case Gauge::MeanBiasZero: return "mean_bias_zero";
        case Gauge::None: return "none";
    }
    return "none";
}

Gauge gauge_from_string(std::string_view text) {
    if (text == "mean_bias_zero") return Gauge::MeanBiasZero;
    if (text == "none") return Gauge::None;
    throw DomainError("unknown gauge '" + std::string(text) + "'");
}

void ModelParams::validate() const {
    if (y.size() != v_c.size()) {
        throw DimensionMismatch("y has " + std::to_string(y.size()) + " entries but v_c has " +
                                std::to_string(v_c.size()));
    }
    if (b.size() != v_s.size()) {
        throw DimensionMismatch("b has " + std::to_string(b.size()) + " entries but v_s has " +
                                std::to_string(v_s.size()));
    }
    auto check = [](const std::vector<double>& values, const char* name, bool non_negative) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!std::isfinite(values[i]) || (non_negative && values[i] < 0.0)) {
                throw DomainError(std::string(name) + "[" + std::to_string(i) + "] = " +
                                  std::to_string(values[i]) + " is invalid");
            }
        }
    };
    check(y, "y", false);
    check(v_c, "v_c", true);
    check(b, "b", false);
    check(v_s, "v_s", true);
    if (gauge == Gauge::MeanBiasZero && !b.empty()) {
        const double mean = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
        if (std::abs(mean) > 1e-9) {
            throw DomainError("mean subject bias " + std::to_string(mean) + " violates the zero-mean gauge");
        }
    }
}

CellDistribution make_cell_distribution(double y, double v_c, double b, double v_s) {
    const double variance = v_c * v_c + v_s * v_s;
    if (!(variance > 0.0)) {
        throw DegenerateVariance("content and subject deviations are both zero");
    }
    return {y + b, std::sqrt(variance)};
}

CellDistribution cell_distribution(const ModelParams& params, std::size_t c, std::size_t s) {
    if (c >= params.y.size() || c >= params.v_c.size() || s >= params.b.size() || s >= params.v_s.size()) {
        throw DimensionMismatch("cell (" + std::to_string(c) + ", " + std::to_string(s) +
                                ") outside the parameter set");
    }
    return make_cell_distribution(params.y[c], params.v_c[c], params.b[s], params.v_s[s]);
}

double q_function(double x) { return 0.5 * std::erfc(x * std::numbers::sqrt2 / 2.0); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

namespace {

// Root of log Q(x) = log p on x >= 0 for 0 < p <= 0.5. Newton steps on the
// log scale keep the tail well conditioned; a bracket guards every step.
double upper_tail_quantile(double p) {
    if (p == 0.5) return 0.0;
    const double log_p = std::log(p);

    // Abramowitz & Stegun 26.2.23 as the starting point (|error| < 4.5e-4).
    const double t = std::sqrt(-2.0 * log_p);
    double x = t - (2.515517 + 0.802853 * t + 0.010328 * t * t) /
                       (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);

    double lo = 0.0;
    double hi = 39.0;  // Q(39) underflows below the smallest positive double
    x = std::clamp(x, lo, hi);

    for (int iter = 0; iter < 200; ++iter) {
        const double q = q_function(x);
        if (q == p) return x;
        if (q > p) {
            lo = x;
        } else {
            hi = x;
        }
        if (q <= 0.0) {
            x = 0.5 * (lo + hi);
            continue;
        }
        const double residual = std::log(q) - log_p;
        if (std::abs(residual) <= 1e-15) return x;
        const double slope = -normal_pdf(x) / q;
        double next = x - residual / slope;
        if (!(next >= lo && next <= hi)) next = 0.5 * (lo + hi);
        const double step = std::abs(next - x);
        x = next;
        if (step <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, x)) break;
    }
    return x;
}

}  // namespace

double q_inverse(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("q_inverse requires 0 < p < 1, got " + std::to_string(p));
    }
    // 1 - p is exact for p >= 0.5.
    if (p > 0.5) return -upper_tail_quantile(1.0 - p);
    return upper_tail_quantile(p);
}

double log_density(const CellDistribution& dist, double value) {
    if (!(dist.sigma > 0.0) || !std::isfinite(dist.sigma)) {
        throw DegenerateVariance("log_density needs sigma > 0");
    }
    const double variance = dist.sigma * dist.sigma;
    const double d = value - dist.mu;
    return -0.5 * std::log(2.0 * std::numbers::pi * variance) - d * d / (2.0 * variance);
}

}  // namespace jnd
