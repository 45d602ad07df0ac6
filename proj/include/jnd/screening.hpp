#pragma once

// Subject screening (iterative fit / reject / refit) and bias-based viewer
// groups: hard-to-satisfy (HS), normal sensitivity (NS), easy-to-satisfy (ES).

#include "jnd/inference.hpp"
#include "jnd/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace jnd {

struct ScreeningPolicy {
    double bias_limit = 4.0;            ///< reject when |b| exceeds this, QP
    double inconsistency_limit = 3.5;   ///< reject when v_s exceeds this, QP
    int max_rounds = 5;

    void validate() const;
};

enum class RejectionReason { Bias, Inconsistency, Both };

std::string_view to_string(RejectionReason reason);

/// Why the policy rejects a subject with these fitted factors, if it does.
std::optional<RejectionReason> rejection_reason(double b, double v_s, const ScreeningPolicy& policy);

struct RejectedSubject {
    std::size_t subject;  ///< column in the input matrix
    std::string id;
    int round;            ///< 1-based screening round that removed it
    double b;             ///< factors at the time of rejection
    double v_s;
    RejectionReason reason;
};

struct ScreeningResult {
    JndMatrix retained;
    /// Input columns kept, in input order; retained column k is input column retained_subjects[k].
    std::vector<std::size_t> retained_subjects;
    std::vector<RejectedSubject> rejected;
    FitResult final_fit;
    int rounds = 0;

    std::vector<std::size_t> rejected_indices() const;
};

/// Fits, removes subjects outside the policy, and refits until nobody is
/// removed or max_rounds is reached. Rejection is never undone. Throws
/// InsufficientData if every subject is rejected.
ScreeningResult screen_subjects(const JndMatrix& matrix, const ScreeningPolicy& policy = {},
                                const FitConfig& config = {});

struct BiasSummary {
    double min;
    double mean;
    double max;
};

struct SubjectGroup {
    std::string name;
    std::vector<std::size_t> members;  ///< subject indices into ModelParams::b
    BiasSummary bias_summary;
};

struct GroupCuts {
    double hs_cut = -1.0;
    double es_cut = 1.0;
};

struct Segmentation {
    std::vector<SubjectGroup> groups;  ///< HS, NS, ES order; empty ones omitted
    std::vector<std::string> notes;
};

/// HS = {b < hs_cut}, ES = {b > es_cut}, NS = the rest.
Segmentation segment_groups(const ModelParams& params, const GroupCuts& cuts = {});

/// Cuts halfway between the order statistics at the 1/3 and 2/3 ranks, so
/// the three groups are as equal in size as ties allow.
GroupCuts tertile_cuts(const ModelParams& params);

/// One group holding every subject, for the universal (ungrouped) model.
SubjectGroup all_subjects_group(const ModelParams& params);

SubjectGroup make_group(const ModelParams& params, std::string name, std::vector<std::size_t> members);

struct GroupParams {
    double b;    ///< mean bias of the members
    double v_s;  ///< root-mean-square inconsistency of the members
};

GroupParams group_params(const ModelParams& params, const SubjectGroup& group);

}  // namespace jnd
