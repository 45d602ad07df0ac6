#pragma once

// File formats.
//
// Matrix CSV: the first line is a corner label followed by the subject ids;
// each following line is a content id followed by one JND value per
// subject, an empty field marking a missing cell. Reals are written in
// shortest round-trip form.
//
// Params document: JSON with "contents", "subjects" and "meta" blocks.

#include "jnd/inference.hpp"
#include "jnd/model.hpp"
#include "jnd/screening.hpp"
#include "jnd/simulator.hpp"
#include "jnd/sur.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace jnd {

inline constexpr std::string_view kToolVersion = "1.0.0";

/// Shortest text that reads back as the same double, at most 17 significant digits.
std::string format_real(double value);

JndMatrix parse_matrix(std::istream& in, const std::string& source = "<matrix>");
JndMatrix read_matrix(const std::filesystem::path& path);
void write_matrix(std::ostream& out, const JndMatrix& matrix);
void write_matrix(const JndMatrix& matrix, const std::filesystem::path& path);

struct ContentEntry {
    std::string id;
    double y = 0.0;
    double v_c = 0.0;
    std::optional<double> ci95_y;

    friend bool operator==(const ContentEntry&, const ContentEntry&) = default;
};

struct SubjectEntry {
    std::string id;
    double b = 0.0;
    double v_s = 0.0;
    std::optional<double> ci95_b;
    bool rejected = false;
    std::optional<int> rejection_round;
    std::optional<std::string> rejection_reason;

    friend bool operator==(const SubjectEntry&, const SubjectEntry&) = default;
};

struct ParamsMeta {
    Gauge gauge = Gauge::MeanBiasZero;
    std::optional<double> log_likelihood;
    std::optional<bool> converged;
    std::optional<int> iterations;
    std::optional<std::string> ci_method;
    std::string tool_version{kToolVersion};
    std::optional<std::uint64_t> seed;
    std::optional<std::string> source;

    friend bool operator==(const ParamsMeta&, const ParamsMeta&) = default;
};

struct ParamsDocument {
    std::vector<ContentEntry> contents;
    std::vector<SubjectEntry> subjects;
    ParamsMeta meta;

    /// Factors of the non-rejected subjects, in document order.
    ModelParams model_params() const;
    std::vector<std::string> content_ids() const;
    std::vector<std::string> retained_subject_ids() const;
    std::optional<std::size_t> find_content(std::string_view id) const;

    friend bool operator==(const ParamsDocument&, const ParamsDocument&) = default;
};

ParamsDocument make_params_document(const JndMatrix& matrix, const FitResult& fit);
ParamsDocument make_params_document(const ScreeningResult& screening, const JndMatrix& original);
ParamsDocument make_truth_document(const JndMatrix& matrix, const ModelParams& truth, std::uint64_t seed);

std::string params_to_text(const ParamsDocument& doc);
ParamsDocument params_from_text(const std::string& text, const std::string& source = "<params>");
ParamsDocument read_params(const std::filesystem::path& path);
void write_params(const ParamsDocument& doc, const std::filesystem::path& path);

/// One line per cell: ids, anchor, six probe/response pairs, result, saturation.
void write_traces(std::ostream& out, const JndMatrix& matrix, const std::vector<BisectionTrace>& traces);
void write_traces(const JndMatrix& matrix, const std::vector<BisectionTrace>& traces,
                  const std::filesystem::path& path);

/// Curves sharing one grid as columns: qp, then one column per curve.
void write_curves(std::ostream& out, const std::vector<SurCurve>& curves, const std::vector<std::string>& headers);

}  // namespace jnd
