#pragma once

// Domain types of the JND user model and the Gaussian kernels shared by every
// other module.
//
// A JND sample Y[c][s] (content c, subject s) is modelled as
//     Y[c][s] ~ N(y[c] + b[s], v_c[c]^2 + v_s[s]^2)
// where y is the content's average JND location, v_c its difficulty, b the
// subject's bias and v_s the subject's inconsistency. All quantities are in
// QP units.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace jnd {

inline constexpr int kMinQp = 0;
inline constexpr int kMaxQp = 51;

/// 1.959964..., the two-sided 95% standard normal quantile.
inline constexpr double kZ95 = 1.959963984540054;

/// Integer quantization parameter index of the H.264 clip ladder.
class QpIndex {
public:
    explicit QpIndex(int value);

    int value() const noexcept { return value_; }
    friend auto operator<=>(QpIndex, QpIndex) = default;

private:
    int value_;
};

/// Contents x subjects matrix of JND locations with a presence mask.
///
/// Entries are stored as reals even though the bisection protocol produces
/// integers, since the model is continuous.
class JndMatrix {
public:
    /// All cells missing; labels default to "c1".."cC" and "s1".."sS".
    JndMatrix(std::size_t n_contents, std::size_t n_subjects);
    JndMatrix(std::vector<std::string> content_ids, std::vector<std::string> subject_ids);

    /// Fully observed matrix from rows of equal length.
    static JndMatrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t n_contents() const noexcept { return content_ids_.size(); }
    std::size_t n_subjects() const noexcept { return subject_ids_.size(); }

    bool has(std::size_t c, std::size_t s) const;
    /// Value of an observed cell; throws InsufficientData for a missing one.
    double at(std::size_t c, std::size_t s) const;
    std::optional<double> get(std::size_t c, std::size_t s) const;

    /// Stores a value; it must be finite and within [0, 51].
    void set(std::size_t c, std::size_t s, double value);
    void clear(std::size_t c, std::size_t s);

    std::size_t observed_in_row(std::size_t c) const;
    std::size_t observed_in_column(std::size_t s) const;
    std::size_t observed() const;

    const std::vector<std::string>& content_ids() const noexcept { return content_ids_; }
    const std::vector<std::string>& subject_ids() const noexcept { return subject_ids_; }
    std::optional<std::size_t> find_content(std::string_view id) const;

    /// Copy restricted to the given subject columns, in the given order.
    JndMatrix select_subjects(std::span<const std::size_t> subjects) const;

    friend bool operator==(const JndMatrix&, const JndMatrix&) = default;

private:
    std::size_t index(std::size_t c, std::size_t s) const;

    std::vector<std::string> content_ids_;
    std::vector<std::string> subject_ids_;
    std::vector<double> values_;
    std::vector<unsigned char> mask_;
};

/// Identifiability convention attached to fitted parameters.
enum class Gauge {
    MeanBiasZero,  ///< sum of b over retained subjects is zero
    None,          ///< no constraint imposed (e.g. hand-entered parameters)
};

std::string_view to_string(Gauge gauge);
Gauge gauge_from_string(std::string_view text);

struct ModelParams {
    std::vector<double> y;
    std::vector<double> v_c;
    std::vector<double> b;
    std::vector<double> v_s;
    Gauge gauge = Gauge::MeanBiasZero;

    std::size_t n_contents() const noexcept { return y.size(); }
    std::size_t n_subjects() const noexcept { return b.size(); }

    /// Throws DimensionMismatch / DomainError when lengths disagree, a
    /// deviation is negative or non-finite, or the gauge is violated.
    void validate() const;
};

/// Gaussian law of one cell.
struct CellDistribution {
    double mu;
    double sigma;
};

/// Law of Y[c][s]: mean y[c] + b[s], standard deviation sqrt(v_c^2 + v_s^2).
CellDistribution cell_distribution(const ModelParams& params, std::size_t c, std::size_t s);

/// Same, from the four factors directly.
CellDistribution make_cell_distribution(double y, double v_c, double b, double v_s);

/// Upper tail P(Z > x) of the standard normal distribution.
double q_function(double x);

/// x such that q_function(x) == p, for 0 < p < 1.
double q_inverse(double p);

/// Standard normal density.
double normal_pdf(double x);

double log_density(const CellDistribution& dist, double value);

}  // namespace jnd
