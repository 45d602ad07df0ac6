#include "jnd/sur.hpp"

#include "jnd/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace jnd {

CurveParams curve_params(const ModelParams& params, std::size_t content, const GroupParams& group) {
    if (content >= params.y.size()) throw DimensionMismatch("content index out of range");
    return {params.y[content], params.v_c[content], group.b, group.v_s};
}

std::string_view to_string(CurveKind kind) {
    switch (kind) {
        case CurveKind::Empirical: return "empirical";
        case CurveKind::Model: return "model";
        case CurveKind::Mixture: return "mixture";
    }
    return "model";
}

double empirical_sur(const JndMatrix& matrix, std::size_t content, const SubjectGroup& group, double qp) {
    if (group.members.empty()) throw InsufficientData("group '" + group.name + "' has no members");
    std::size_t observed = 0;
    std::size_t satisfied = 0;
    for (auto s : group.members) {
        const auto value = matrix.get(content, s);
        if (!value) continue;
        ++observed;
        if (*value > qp) ++satisfied;
    }
    if (observed == 0) {
        throw InsufficientData("group '" + group.name + "' has no observations for content '" +
                               matrix.content_ids()[content] + "'");
    }
    return static_cast<double>(satisfied) / static_cast<double>(observed);
}

double model_sur(const CurveParams& p, double qp) {
    const auto dist = make_cell_distribution(p.y, p.v_c, p.b, p.v_s);
    return q_function((qp - dist.mu) / dist.sigma);
}

double mixture_sur(const ModelParams& params, std::size_t content, const SubjectGroup& group, double qp) {
    if (group.members.empty()) throw InsufficientData("group '" + group.name + "' has no members");
    double sum = 0.0;
    for (auto s : group.members) {
        const auto dist = cell_distribution(params, content, s);
        sum += q_function((qp - dist.mu) / dist.sigma);
    }
    return sum / static_cast<double>(group.members.size());
}

double qp_for_target_sur(const CurveParams& p, double target) {
    if (!(target > 0.0 && target < 1.0)) {
        throw DomainError("target SUR must lie in (0, 1), got " + std::to_string(target));
    }
    const auto dist = make_cell_distribution(p.y, p.v_c, p.b, p.v_s);
    return dist.mu + dist.sigma * q_inverse(target);
}

double qp_for_target_sur_mixture(const ModelParams& params, std::size_t content, const SubjectGroup& group,
                                 double target) {
    if (!(target > 0.0 && target < 1.0)) {
        throw DomainError("target SUR must lie in (0, 1), got " + std::to_string(target));
    }
    if (group.members.empty()) throw InsufficientData("group '" + group.name + "' has no members");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (auto s : group.members) {
        const auto dist = cell_distribution(params, content, s);
        lo = std::min(lo, dist.mu - 40.0 * dist.sigma);
        hi = std::max(hi, dist.mu + 40.0 * dist.sigma);
    }
    for (int iter = 0; iter < 400 && hi - lo > 1e-12; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mixture_sur(params, content, group, mid) > target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

std::vector<double> make_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw DomainError("grid needs lo <= hi and step > 0");
    }
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> grid;
    grid.reserve(n);
    for (std::size_t i = 0; i < n; ++i) grid.push_back(lo + static_cast<double>(i) * step);
    return grid;
}

void validate_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw DomainError("QP grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= kMinQp && grid[i] <= kMaxQp)) {
            throw DomainError("grid point " + std::to_string(grid[i]) + " outside [0, 51]");
        }
        if (i > 0 && !(grid[i] > grid[i - 1])) {
            throw DomainError("QP grid is not strictly increasing at position " + std::to_string(i));
        }
    }
}

SurCurve sample_curve(const CurveParams& p, const std::vector<double>& grid, std::string content_id,
                      std::string group_name) {
    validate_grid(grid);
    SurCurve curve{std::move(content_id), std::move(group_name), {}, CurveKind::Model};
    curve.points.reserve(grid.size());
    for (double qp : grid) curve.points.push_back({qp, model_sur(p, qp)});
    return curve;
}

SurCurve sample_mixture_curve(const ModelParams& params, std::size_t content, const SubjectGroup& group,
                              const std::vector<double>& grid, std::string content_id) {
    validate_grid(grid);
    SurCurve curve{std::move(content_id), group.name, {}, CurveKind::Mixture};
    curve.points.reserve(grid.size());
    for (double qp : grid) curve.points.push_back({qp, mixture_sur(params, content, group, qp)});
    return curve;
}

SurCurve sample_empirical_curve(const JndMatrix& matrix, std::size_t content, const SubjectGroup& group,
                                const std::vector<double>& grid) {
    validate_grid(grid);
    SurCurve curve{matrix.content_ids().at(content), group.name, {}, CurveKind::Empirical};
    curve.points.reserve(grid.size());
    for (double qp : grid) curve.points.push_back({qp, empirical_sur(matrix, content, group, qp)});
    return curve;
}

}  // namespace jnd
