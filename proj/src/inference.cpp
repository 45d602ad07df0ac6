#include "jnd/inference.hpp"

#include "jnd/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>

namespace jnd {

void FitConfig::validate() const {
    if (max_iterations < 1) throw DomainError("max_iterations must be >= 1");
    if (!(tolerance > 0.0)) throw DomainError("tolerance must be > 0");
    if (!(variance_floor > 0.0)) throw DomainError("variance_floor must be > 0");
    if (restarts < 0) throw DomainError("restarts must be >= 0");
    if (bootstrap_resamples < 0) throw DomainError("bootstrap_resamples must be >= 0");
}

std::string_view to_string(CiMethod method) {
    return method == CiMethod::Wald ? "wald" : "bootstrap";
}

namespace {

struct Entry {
    std::size_t index;  // subject for a row list, content for a column list
    double value;
};

// Observed cells indexed both ways.
struct Observations {
    std::size_t n_contents = 0;
    std::size_t n_subjects = 0;
    std::vector<std::vector<Entry>> rows;
    std::vector<std::vector<Entry>> columns;

    explicit Observations(const JndMatrix& matrix)
        : n_contents(matrix.n_contents()),
          n_subjects(matrix.n_subjects()),
          rows(matrix.n_contents()),
          columns(matrix.n_subjects()) {
        for (std::size_t c = 0; c < n_contents; ++c) {
            for (std::size_t s = 0; s < n_subjects; ++s) {
                if (auto v = matrix.get(c, s)) {
                    rows[c].push_back({s, *v});
                    columns[s].push_back({c, *v});
                }
            }
        }
    }
};

// Solver state; deviations are carried as variances.
struct State {
    std::vector<double> y;
    std::vector<double> b;
    std::vector<double> var_c;
    std::vector<double> var_s;
};

constexpr double kHalfLog2Pi = 0.91893853320467274178;

void check_dimensions(const JndMatrix& matrix, const ModelParams& params) {
    if (params.y.size() != matrix.n_contents() || params.v_c.size() != matrix.n_contents() ||
        params.b.size() != matrix.n_subjects() || params.v_s.size() != matrix.n_subjects()) {
        throw DimensionMismatch("parameters sized " + std::to_string(params.y.size()) + "x" +
                                std::to_string(params.b.size()) + " do not match a " +
                                std::to_string(matrix.n_contents()) + "x" + std::to_string(matrix.n_subjects()) +
                                " matrix");
    }
}

double objective(const Observations& obs, const State& st) {
    double total = 0.0;
    for (std::size_t c = 0; c < obs.n_contents; ++c) {
        for (const auto& e : obs.rows[c]) {
            const double v = st.var_c[c] + st.var_s[e.index];
            const double r = e.value - st.y[c] - st.b[e.index];
            total += kHalfLog2Pi + 0.5 * std::log(v) + r * r / (2.0 * v);
        }
    }
    return total;
}

// One (other variance, squared residual) pair per observation touching the
// variance being optimized.
struct VarianceTerm {
    double other_var;
    double r2;
};

double variance_objective(std::span<const VarianceTerm> terms, double var) {
    double f = 0.0;
    for (const auto& t : terms) {
        const double v = var + t.other_var;
        f += 0.5 * std::log(v) + t.r2 / (2.0 * v);
    }
    return f;
}

// Minimizes the objective over theta = log(var), theta >= log(floor), with
// safeguarded Newton steps. Never returns a point worse than the start.
double minimize_log_variance(std::span<const VarianceTerm> terms, double var, double floor) {
    if (terms.empty()) return var;
    const double theta_floor = std::log(floor);
    double theta = std::log(std::max(var, floor));
    double f = variance_objective(terms, std::exp(theta));

    for (int iter = 0; iter < 8; ++iter) {
        const double a = std::exp(theta);
        double g = 0.0;
        double h = 0.0;
        for (const auto& t : terms) {
            const double v = a + t.other_var;
            const double dv = 0.5 / v - t.r2 / (2.0 * v * v);
            const double d2v = -0.5 / (v * v) + t.r2 / (v * v * v);
            g += a * dv;
            h += a * dv + a * a * d2v;
        }
        double step = h > 0.0 ? -g / h : (g > 0.0 ? -1.0 : 1.0);
        step = std::clamp(step, -4.0, 4.0);

        bool moved = false;
        for (int k = 0; k < 40; ++k) {
            const double candidate = std::max(theta + step, theta_floor);
            if (candidate == theta) break;
            const double fc = variance_objective(terms, std::exp(candidate));
            if (fc <= f) {
                step = candidate - theta;
                theta = candidate;
                f = fc;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved || std::abs(step) < 1e-12) break;
    }
    return std::exp(theta);
}

void update_locations(const Observations& obs, State& st) {
    for (std::size_t c = 0; c < obs.n_contents; ++c) {
        double num = 0.0;
        double den = 0.0;
        for (const auto& e : obs.rows[c]) {
            const double w = 1.0 / (st.var_c[c] + st.var_s[e.index]);
            num += w * (e.value - st.b[e.index]);
            den += w;
        }
        st.y[c] = num / den;
    }
}

void update_biases(const Observations& obs, State& st) {
    for (std::size_t s = 0; s < obs.n_subjects; ++s) {
        double num = 0.0;
        double den = 0.0;
        for (const auto& e : obs.columns[s]) {
            const double w = 1.0 / (st.var_c[e.index] + st.var_s[s]);
            num += w * (e.value - st.y[e.index]);
            den += w;
        }
        st.b[s] = num / den;
    }
}

void update_content_variances(const Observations& obs, State& st, double floor) {
    std::vector<VarianceTerm> terms;
    for (std::size_t c = 0; c < obs.n_contents; ++c) {
        terms.clear();
        for (const auto& e : obs.rows[c]) {
            const double r = e.value - st.y[c] - st.b[e.index];
            terms.push_back({st.var_s[e.index], r * r});
        }
        st.var_c[c] = minimize_log_variance(terms, st.var_c[c], floor);
    }
}

void update_subject_variances(const Observations& obs, State& st, double floor) {
    std::vector<VarianceTerm> terms;
    for (std::size_t s = 0; s < obs.n_subjects; ++s) {
        terms.clear();
        for (const auto& e : obs.columns[s]) {
            const double r = e.value - st.y[e.index] - st.b[s];
            terms.push_back({st.var_c[e.index], r * r});
        }
        st.var_s[s] = minimize_log_variance(terms, st.var_s[s], floor);
    }
}

void recenter(State& st) {
    const double mean = std::accumulate(st.b.begin(), st.b.end(), 0.0) / static_cast<double>(st.b.size());
    for (auto& b : st.b) b -= mean;
    for (auto& y : st.y) y += mean;
}

double variance_of(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(values.size() - 1);
}

// y = row means, b = column means of Y - y, deviations = residual spread.
State initial_state(const Observations& obs, double floor) {
    State st;
    st.y.resize(obs.n_contents);
    st.b.resize(obs.n_subjects);
    st.var_c.resize(obs.n_contents);
    st.var_s.resize(obs.n_subjects);
    for (std::size_t c = 0; c < obs.n_contents; ++c) {
        double sum = 0.0;
        for (const auto& e : obs.rows[c]) sum += e.value;
        st.y[c] = sum / static_cast<double>(obs.rows[c].size());
    }
    for (std::size_t s = 0; s < obs.n_subjects; ++s) {
        double sum = 0.0;
        for (const auto& e : obs.columns[s]) sum += e.value - st.y[e.index];
        st.b[s] = sum / static_cast<double>(obs.columns[s].size());
    }
    recenter(st);
    std::vector<double> residuals;
    for (std::size_t c = 0; c < obs.n_contents; ++c) {
        residuals.clear();
        for (const auto& e : obs.rows[c]) residuals.push_back(e.value - st.y[c] - st.b[e.index]);
        st.var_c[c] = std::max(variance_of(residuals), floor);
    }
    for (std::size_t s = 0; s < obs.n_subjects; ++s) {
        residuals.clear();
        for (const auto& e : obs.columns[s]) residuals.push_back(e.value - st.y[e.index] - st.b[s]);
        st.var_s[s] = std::max(variance_of(residuals), floor);
    }
    return st;
}

// Perturbation draws are keyed by content only (plus one common factor for
// the subject variances), so reordering subject columns does not change them.
State perturbed_state(const State& base, std::mt19937_64& rng, double floor) {
    State st = base;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t c = 0; c < st.y.size(); ++c) {
        st.y[c] += 0.5 * normal(rng);
        st.var_c[c] = std::max(st.var_c[c] * std::exp(0.5 * normal(rng)), floor);
    }
    const double scale = std::exp(0.5 * normal(rng));
    for (auto& v : st.var_s) v = std::max(v * scale, floor);
    return st;
}

struct RunOutcome {
    State state;
    double nll = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> trace;
};

RunOutcome run_sweeps(const Observations& obs, State st, const FitConfig& config) {
    RunOutcome out;
    double previous = objective(obs, st);
    out.trace.push_back(previous);
    for (int it = 1; it <= config.max_iterations; ++it) {
        update_locations(obs, st);
        update_biases(obs, st);
        update_content_variances(obs, st, config.variance_floor);
        update_subject_variances(obs, st, config.variance_floor);
        recenter(st);
        const double current = objective(obs, st);
        out.trace.push_back(current);
        out.iterations = it;
        const double change = std::abs(previous - current) / std::max(1.0, std::abs(current));
        previous = current;
        if (change < config.tolerance) {
            out.converged = true;
            break;
        }
    }
    out.nll = previous;
    out.state = std::move(st);
    return out;
}

void require_coverage(const Observations& obs, const JndMatrix& matrix) {
    for (std::size_t c = 0; c < obs.n_contents; ++c) {
        if (obs.rows[c].empty()) {
            throw InsufficientData("content '" + matrix.content_ids()[c] + "' has no observations");
        }
    }
    for (std::size_t s = 0; s < obs.n_subjects; ++s) {
        if (obs.columns[s].empty()) {
            throw InsufficientData("subject '" + matrix.subject_ids()[s] + "' has no observations");
        }
    }
}

ModelParams to_params(const State& st) {
    ModelParams p;
    p.y = st.y;
    p.b = st.b;
    p.v_c.reserve(st.var_c.size());
    p.v_s.reserve(st.var_s.size());
    for (double v : st.var_c) p.v_c.push_back(std::sqrt(v));
    for (double v : st.var_s) p.v_s.push_back(std::sqrt(v));
    p.gauge = Gauge::MeanBiasZero;
    return p;
}

// Best of the canonical start and config.restarts perturbed starts; a
// converged run beats a non-converged one.
FitResult fit_point(const JndMatrix& matrix, const FitConfig& config) {
    const Observations obs(matrix);
    require_coverage(obs, matrix);

    FitResult result;
    if (obs.n_contents < 2) result.warnings.push_back("fewer than 2 contents: subject factors are weakly identified");
    if (obs.n_subjects < 2) result.warnings.push_back("fewer than 2 subjects: content factors are weakly identified");

    const State base = initial_state(obs, config.variance_floor);
    std::mt19937_64 rng(config.seed);

    std::optional<RunOutcome> best;
    for (int attempt = 0; attempt <= config.restarts; ++attempt) {
        State start = attempt == 0 ? base : perturbed_state(base, rng, config.variance_floor);
        RunOutcome run = run_sweeps(obs, std::move(start), config);
        const bool better = !best || (run.converged && !best->converged) ||
                            (run.converged == best->converged && run.nll < best->nll);
        if (better) best = std::move(run);
    }

    result.params = to_params(best->state);
    result.log_likelihood = -best->nll;
    result.converged = best->converged;
    result.iterations = best->iterations;
    result.objective_trace = std::move(best->trace);
    return result;
}

double percentile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace

double negative_log_likelihood(const JndMatrix& matrix, const ModelParams& params) {
    check_dimensions(matrix, params);
    double total = 0.0;
    for (std::size_t c = 0; c < matrix.n_contents(); ++c) {
        for (std::size_t s = 0; s < matrix.n_subjects(); ++s) {
            if (auto v = matrix.get(c, s)) total -= log_density(cell_distribution(params, c, s), *v);
        }
    }
    return total;
}

NllGradient nll_gradient(const JndMatrix& matrix, const ModelParams& params) {
    check_dimensions(matrix, params);
    NllGradient g{std::vector<double>(params.y.size(), 0.0), std::vector<double>(params.b.size(), 0.0),
                  std::vector<double>(params.y.size(), 0.0), std::vector<double>(params.b.size(), 0.0)};
    for (std::size_t c = 0; c < matrix.n_contents(); ++c) {
        for (std::size_t s = 0; s < matrix.n_subjects(); ++s) {
            const auto value = matrix.get(c, s);
            if (!value) continue;
            const auto dist = cell_distribution(params, c, s);
            const double v = dist.sigma * dist.sigma;
            const double r = *value - dist.mu;
            g.y[c] -= r / v;
            g.b[s] -= r / v;
            const double dv = 0.5 / v - r * r / (2.0 * v * v);
            g.log_var_c[c] += params.v_c[c] * params.v_c[c] * dv;
            g.log_var_s[s] += params.v_s[s] * params.v_s[s] * dv;
        }
    }
    return g;
}

std::vector<double> optimal_content_locations(const JndMatrix& matrix, const ModelParams& params) {
    check_dimensions(matrix, params);
    std::vector<double> y(matrix.n_contents());
    for (std::size_t c = 0; c < matrix.n_contents(); ++c) {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t s = 0; s < matrix.n_subjects(); ++s) {
            const auto value = matrix.get(c, s);
            if (!value) continue;
            const auto dist = cell_distribution(params, c, s);
            const double w = 1.0 / (dist.sigma * dist.sigma);
            num += w * (*value - params.b[s]);
            den += w;
        }
        if (den == 0.0) throw InsufficientData("content '" + matrix.content_ids()[c] + "' has no observations");
        y[c] = num / den;
    }
    return y;
}

ConfidenceIntervals confidence_intervals(const JndMatrix& matrix, const ModelParams& params) {
    check_dimensions(matrix, params);
    const auto n_c = static_cast<Eigen::Index>(matrix.n_contents());
    const auto n_s = static_cast<Eigen::Index>(matrix.n_subjects());

    // Observed information of the locations: sum of w (e_c + e_s)(e_c + e_s)^T.
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(n_c + n_s, n_c + n_s);
    for (Eigen::Index c = 0; c < n_c; ++c) {
        for (Eigen::Index s = 0; s < n_s; ++s) {
            if (!matrix.has(static_cast<std::size_t>(c), static_cast<std::size_t>(s))) continue;
            const auto dist = cell_distribution(params, static_cast<std::size_t>(c), static_cast<std::size_t>(s));
            const double w = 1.0 / (dist.sigma * dist.sigma);
            info(c, c) += w;
            info(n_c + s, n_c + s) += w;
            info(c, n_c + s) += w;
            info(n_c + s, c) += w;
        }
    }

    // Gauge reduction: the last bias is minus the sum of the others.
    const Eigen::Index n_red = n_c + n_s - 1;
    Eigen::MatrixXd reduce = Eigen::MatrixXd::Zero(n_c + n_s, n_red);
    reduce.topLeftCorner(n_red, n_red).setIdentity();
    for (Eigen::Index s = 0; s + 1 < n_s; ++s) reduce(n_c + n_s - 1, n_c + s) = -1.0;

    const Eigen::MatrixXd reduced = reduce.transpose() * info * reduce;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reduced);
    if (eig.info() != Eigen::Success) {
        throw SingularInformation("eigen-decomposition of the information matrix failed", {});
    }
    const auto& lambda = eig.eigenvalues();
    const double threshold = 1e-12 * std::max(lambda.cwiseAbs().maxCoeff(), 1e-300);

    auto name_of = [&](Eigen::Index i) {
        return i < n_c ? "y[" + matrix.content_ids()[static_cast<std::size_t>(i)] + "]"
                       : "b[" + matrix.subject_ids()[static_cast<std::size_t>(i - n_c)] + "]";
    };
    std::vector<std::string> weak;
    for (Eigen::Index k = 0; k < n_red; ++k) {
        if (lambda(k) > threshold) continue;
        for (Eigen::Index i = 0; i < n_red; ++i) {
            if (std::abs(eig.eigenvectors()(i, k)) > 1e-6) {
                const auto name = name_of(i);
                if (std::find(weak.begin(), weak.end(), name) == weak.end()) weak.push_back(name);
            }
        }
    }
    if (!weak.empty()) {
        std::string list;
        for (const auto& name : weak) list += (list.empty() ? "" : ", ") + name;
        throw SingularInformation("location information is singular in: " + list, weak);
    }

    const Eigen::MatrixXd cov_reduced =
        eig.eigenvectors() * lambda.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
    const Eigen::MatrixXd cov = reduce * cov_reduced * reduce.transpose();

    ConfidenceIntervals out;
    out.ci95_y.resize(matrix.n_contents());
    out.ci95_b.resize(matrix.n_subjects());
    for (Eigen::Index c = 0; c < n_c; ++c) {
        out.ci95_y[static_cast<std::size_t>(c)] = kZ95 * std::sqrt(std::max(cov(c, c), 0.0));
    }
    for (Eigen::Index s = 0; s < n_s; ++s) {
        out.ci95_b[static_cast<std::size_t>(s)] = kZ95 * std::sqrt(std::max(cov(n_c + s, n_c + s), 0.0));
    }
    return out;
}

ConfidenceIntervals bootstrap_intervals(const JndMatrix& matrix, const FitConfig& config) {
    config.validate();
    const std::size_t n_c = matrix.n_contents();
    const std::size_t n_s = matrix.n_subjects();
    FitConfig inner = config;
    inner.restarts = 0;
    inner.bootstrap_resamples = 0;

    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_int_distribution<std::size_t> pick(0, n_s - 1);
    std::vector<std::vector<double>> y_draws(n_c);
    std::vector<std::vector<double>> b_draws(n_s);

    std::vector<std::size_t> chosen(n_s);
    for (int r = 0; r < config.bootstrap_resamples; ++r) {
        for (auto& s : chosen) s = pick(rng);
        std::vector<std::string> ids;
        ids.reserve(n_s);
        for (std::size_t k = 0; k < n_s; ++k) ids.push_back(matrix.subject_ids()[chosen[k]] + "#" + std::to_string(k));
        JndMatrix resample(matrix.content_ids(), std::move(ids));
        bool covered = true;
        for (std::size_t c = 0; c < n_c; ++c) {
            for (std::size_t k = 0; k < n_s; ++k) {
                if (auto v = matrix.get(c, chosen[k])) resample.set(c, k, *v);
            }
            covered = covered && resample.observed_in_row(c) > 0;
        }
        if (!covered) continue;

        const FitResult fit = fit_point(resample, inner);
        for (std::size_t c = 0; c < n_c; ++c) y_draws[c].push_back(fit.params.y[c]);
        std::vector<bool> seen(n_s, false);
        for (std::size_t k = 0; k < n_s; ++k) {
            if (seen[chosen[k]]) continue;
            seen[chosen[k]] = true;
            b_draws[chosen[k]].push_back(fit.params.b[k]);
        }
    }

    auto half_width = [](const std::vector<double>& draws, const std::string& name) {
        if (draws.size() < 2) throw InsufficientData("too few bootstrap draws for " + name);
        return 0.5 * (percentile(draws, 0.975) - percentile(draws, 0.025));
    };
    ConfidenceIntervals out;
    for (std::size_t c = 0; c < n_c; ++c) out.ci95_y.push_back(half_width(y_draws[c], matrix.content_ids()[c]));
    for (std::size_t s = 0; s < n_s; ++s) out.ci95_b.push_back(half_width(b_draws[s], matrix.subject_ids()[s]));
    return out;
}

FitResult fit_mle(const JndMatrix& matrix, const FitConfig& config) {
    config.validate();
    FitResult result = fit_point(matrix, config);
    try {
        auto ci = confidence_intervals(matrix, result.params);
        result.ci95_y = std::move(ci.ci95_y);
        result.ci95_b = std::move(ci.ci95_b);
        result.ci_method = CiMethod::Wald;
    } catch (const SingularInformation& e) {
        result.warnings.push_back(std::string(e.what()) + "; using bootstrap intervals");
        if (config.bootstrap_resamples == 0) throw;
        auto ci = bootstrap_intervals(matrix, config);
        result.ci95_y = std::move(ci.ci95_y);
        result.ci95_b = std::move(ci.ci95_b);
        result.ci_method = CiMethod::Bootstrap;
    }
    return result;
}

MosEstimate mos_estimate(const JndMatrix& matrix) {
    MosEstimate out;
    std::vector<double> row;
    for (std::size_t c = 0; c < matrix.n_contents(); ++c) {
        row.clear();
        for (std::size_t s = 0; s < matrix.n_subjects(); ++s) {
            if (auto v = matrix.get(c, s)) row.push_back(*v);
        }
        if (row.size() < 2) {
            throw InsufficientData("content '" + matrix.content_ids()[c] + "' has " + std::to_string(row.size()) +
                                   " observations; MOS needs at least 2");
        }
        const double n = static_cast<double>(row.size());
        out.mean.push_back(std::accumulate(row.begin(), row.end(), 0.0) / n);
        out.ci95.push_back(kZ95 * std::sqrt(variance_of(row)) / std::sqrt(n));
        out.n.push_back(row.size());
    }
    return out;
}

}  // namespace jnd
