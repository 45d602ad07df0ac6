#pragma once

// Satisfied user ratio: the fraction of a viewer group that cannot tell a
// clip coded at a given QP from its anchor.

#include "jnd/model.hpp"
#include "jnd/screening.hpp"

#include <string>
#include <vector>

namespace jnd {

/// Content factors paired with one group's aggregated subject factors.
struct CurveParams {
    double y;
    double v_c;
    double b;
    double v_s;
};

CurveParams curve_params(const ModelParams& params, std::size_t content, const GroupParams& group);

enum class CurveKind { Empirical, Model, Mixture };

std::string_view to_string(CurveKind kind);

struct SurPoint {
    double qp;
    double sur;
};

struct SurCurve {
    std::string content_id;
    std::string group_name;
    std::vector<SurPoint> points;
    CurveKind kind = CurveKind::Model;
};

/// Share of group members whose JND in row `content` lies strictly above
/// `qp`. A member whose JND equals qp sees the difference. Missing cells are
/// skipped and the denominator shrinks accordingly.
double empirical_sur(const JndMatrix& matrix, std::size_t content, const SubjectGroup& group, double qp);

/// Q((qp - (y + b)) / sqrt(v_c^2 + v_s^2)).
double model_sur(const CurveParams& p, double qp);

/// Average of the per-member curves Q((qp - y - b_s) / sqrt(v_c^2 + v_s[s]^2)).
double mixture_sur(const ModelParams& params, std::size_t content, const SubjectGroup& group, double qp);

/// Smallest QP whose model SUR equals `target`.
double qp_for_target_sur(const CurveParams& p, double target);

/// Same for the mixture form, solved by bisection to 1e-12 QP.
double qp_for_target_sur_mixture(const ModelParams& params, std::size_t content, const SubjectGroup& group,
                                 double target);

/// lo, lo + step, ..., hi (hi included when it falls on the lattice).
std::vector<double> make_grid(double lo, double hi, double step);

/// Throws DomainError unless the grid is non-empty, strictly increasing and
/// within [0, 51].
void validate_grid(const std::vector<double>& grid);

SurCurve sample_curve(const CurveParams& p, const std::vector<double>& grid, std::string content_id = {},
                      std::string group_name = {});

SurCurve sample_mixture_curve(const ModelParams& params, std::size_t content, const SubjectGroup& group,
                              const std::vector<double>& grid, std::string content_id = {});

SurCurve sample_empirical_curve(const JndMatrix& matrix, std::size_t content, const SubjectGroup& group,
                                const std::vector<double>& grid);

}  // namespace jnd
