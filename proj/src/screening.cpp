#include "jnd/screening.hpp"

#include "jnd/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace jnd {

void ScreeningPolicy::validate() const {
    if (!(bias_limit > 0.0)) throw DomainError("bias_limit must be > 0");
    if (!(inconsistency_limit > 0.0)) throw DomainError("inconsistency_limit must be > 0");
    if (max_rounds < 1) throw DomainError("max_rounds must be >= 1");
}

std::string_view to_string(RejectionReason reason) {
    switch (reason) {
        case RejectionReason::Bias: return "bias";
        case RejectionReason::Inconsistency: return "inconsistency";
        case RejectionReason::Both: return "bias+inconsistency";
    }
    return "bias";
}

std::vector<std::size_t> ScreeningResult::rejected_indices() const {
    std::vector<std::size_t> out;
    out.reserve(rejected.size());
    for (const auto& r : rejected) out.push_back(r.subject);
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<RejectionReason> rejection_reason(double b, double v_s, const ScreeningPolicy& policy) {
    const bool biased = std::abs(b) > policy.bias_limit;
    const bool inconsistent = v_s > policy.inconsistency_limit;
    if (biased && inconsistent) return RejectionReason::Both;
    if (biased) return RejectionReason::Bias;
    if (inconsistent) return RejectionReason::Inconsistency;
    return std::nullopt;
}

ScreeningResult screen_subjects(const JndMatrix& matrix, const ScreeningPolicy& policy, const FitConfig& config) {
    policy.validate();
    config.validate();

    std::vector<std::size_t> kept(matrix.n_subjects());
    std::iota(kept.begin(), kept.end(), std::size_t{0});

    ScreeningResult result{matrix, kept, {}, {}, 0};
    for (int round = 1; round <= policy.max_rounds; ++round) {
        result.rounds = round;
        FitResult fit = fit_mle(result.retained, config);

        std::vector<std::size_t> next;
        for (std::size_t k = 0; k < kept.size(); ++k) {
            const double b = fit.params.b[k];
            const double v_s = fit.params.v_s[k];
            const auto reason = rejection_reason(b, v_s, policy);
            if (!reason) {
                next.push_back(kept[k]);
                continue;
            }
            result.rejected.push_back({kept[k], matrix.subject_ids()[kept[k]], round, b, v_s, *reason});
        }

        if (next.size() == kept.size()) {
            result.final_fit = std::move(fit);
            return result;
        }
        if (next.empty()) {
            throw InsufficientData("every subject was rejected by the screening policy");
        }
        kept = std::move(next);
        result.retained = matrix.select_subjects(kept);
        result.retained_subjects = kept;
    }
    // Round limit reached right after a rejection: the final fit is of the
    // cleaned matrix, not of the one that produced the last rejections.
    result.final_fit = fit_mle(result.retained, config);
    return result;
}

SubjectGroup make_group(const ModelParams& params, std::string name, std::vector<std::size_t> members) {
    if (members.empty()) throw InsufficientData("group '" + name + "' has no members");
    BiasSummary summary{params.b.at(members.front()), 0.0, params.b.at(members.front())};
    double sum = 0.0;
    for (auto s : members) {
        const double b = params.b.at(s);
        summary.min = std::min(summary.min, b);
        summary.max = std::max(summary.max, b);
        sum += b;
    }
    summary.mean = sum / static_cast<double>(members.size());
    return {std::move(name), std::move(members), summary};
}

Segmentation segment_groups(const ModelParams& params, const GroupCuts& cuts) {
    if (!(cuts.hs_cut < cuts.es_cut)) {
        throw DomainError("group cuts must satisfy hs_cut < es_cut");
    }
    std::vector<std::size_t> hs;
    std::vector<std::size_t> ns;
    std::vector<std::size_t> es;
    for (std::size_t s = 0; s < params.b.size(); ++s) {
        const double b = params.b[s];
        if (b < cuts.hs_cut) {
            hs.push_back(s);
        } else if (b > cuts.es_cut) {
            es.push_back(s);
        } else {
            ns.push_back(s);
        }
    }
    Segmentation out;
    auto emit = [&](const char* name, std::vector<std::size_t>& members) {
        if (members.empty()) {
            out.notes.push_back(std::string(name) + " group is empty and was omitted");
            return;
        }
        out.groups.push_back(make_group(params, name, std::move(members)));
    };
    emit("HS", hs);
    emit("NS", ns);
    emit("ES", es);
    return out;
}

GroupCuts tertile_cuts(const ModelParams& params) {
    const std::size_t n = params.b.size();
    if (n < 3) throw InsufficientData("tertile cuts need at least 3 subjects");
    std::vector<double> sorted = params.b;
    std::sort(sorted.begin(), sorted.end());
    const auto first = static_cast<std::size_t>(std::llround(static_cast<double>(n) / 3.0));
    const auto second = static_cast<std::size_t>(std::llround(2.0 * static_cast<double>(n) / 3.0));
    GroupCuts cuts{0.5 * (sorted[first - 1] + sorted[first]), 0.5 * (sorted[second - 1] + sorted[second])};
    if (!(cuts.hs_cut < cuts.es_cut)) {
        throw DomainError("tertile cuts coincide; biases are too concentrated to split in three");
    }
    return cuts;
}

SubjectGroup all_subjects_group(const ModelParams& params) {
    std::vector<std::size_t> members(params.b.size());
    std::iota(members.begin(), members.end(), std::size_t{0});
    return make_group(params, "ALL", std::move(members));
}

GroupParams group_params(const ModelParams& params, const SubjectGroup& group) {
    if (group.members.empty()) throw InsufficientData("group '" + group.name + "' has no members");
    double b_sum = 0.0;
    double var_sum = 0.0;
    for (auto s : group.members) {
        b_sum += params.b.at(s);
        var_sum += params.v_s.at(s) * params.v_s.at(s);
    }
    const double n = static_cast<double>(group.members.size());
    return {b_sum / n, std::sqrt(var_sum / n)};
}

}  // namespace jnd
