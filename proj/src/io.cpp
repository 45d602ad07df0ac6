#include "jnd/io.hpp"

#include "jnd/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace jnd {

using json = nlohmann::json;

std::string format_real(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

JndMatrix parse_matrix(std::istream& in, const std::string& source) {
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    if (lines.empty()) throw ParseError(source, 1, 0, "empty matrix file");

    const auto header = split_fields(lines.front());
    if (header.size() < 2) throw ParseError(source, 1, 0, "header needs a corner label and at least one subject id");
    std::vector<std::string> subject_ids;
    std::unordered_set<std::string> seen_subjects;
    for (std::size_t k = 1; k < header.size(); ++k) {
        std::string id(header[k]);
        if (id.empty()) throw ParseError(source, 1, k + 1, "empty subject id");
        if (!seen_subjects.insert(id).second) throw ParseError(source, 1, k + 1, "duplicate subject id '" + id + "'");
        subject_ids.push_back(std::move(id));
    }
    if (lines.size() < 2) throw ParseError(source, 1, 0, "matrix has no content rows");

    struct Row {
        std::string id;
        std::vector<std::optional<double>> values;
    };
    std::vector<Row> rows;
    std::unordered_set<std::string> seen_contents;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        const auto fields = split_fields(lines[i]);
        if (fields.size() != header.size()) {
            throw ParseError(source, line_no, 0,
                             "malformed row: " + std::to_string(fields.size()) + " fields, expected " +
                                 std::to_string(header.size()));
        }
        Row row{std::string(fields[0]), {}};
        if (row.id.empty()) throw ParseError(source, line_no, 1, "empty content id");
        if (!seen_contents.insert(row.id).second) {
            throw ParseError(source, line_no, 1, "duplicate content id '" + row.id + "'");
        }
        for (std::size_t k = 1; k < fields.size(); ++k) {
            const auto field = fields[k];
            if (field.empty()) {
                row.values.emplace_back();
                continue;
            }
            double value = 0.0;
            const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
            if (res.ec != std::errc{} || res.ptr != field.data() + field.size() || !std::isfinite(value)) {
                throw ParseError(source, line_no, k + 1,
                                 "non-numeric value '" + std::string(field) + "' for content '" + row.id +
                                     "', subject '" + subject_ids[k - 1] + "'");
            }
            if (value < kMinQp || value > kMaxQp) {
                throw ParseError(source, line_no, k + 1,
                                 "value " + std::string(field) + " for content '" + row.id + "', subject '" +
                                     subject_ids[k - 1] + "' is outside [0, 51]");
            }
            row.values.emplace_back(value);
        }
        rows.push_back(std::move(row));
    }

    std::vector<std::string> content_ids;
    for (const auto& r : rows) content_ids.push_back(r.id);
    JndMatrix matrix(std::move(content_ids), std::move(subject_ids));
    for (std::size_t c = 0; c < rows.size(); ++c) {
        for (std::size_t s = 0; s < rows[c].values.size(); ++s) {
            if (rows[c].values[s]) matrix.set(c, s, *rows[c].values[s]);
        }
    }
    return matrix;
}

JndMatrix read_matrix(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_matrix(in, path.string());
}

void write_matrix(std::ostream& out, const JndMatrix& matrix) {
    out << "content";
    for (const auto& id : matrix.subject_ids()) out << ',' << id;
    out << '\n';
    for (std::size_t c = 0; c < matrix.n_contents(); ++c) {
        out << matrix.content_ids()[c];
        for (std::size_t s = 0; s < matrix.n_subjects(); ++s) {
            out << ',';
            if (auto v = matrix.get(c, s)) out << format_real(*v);
        }
        out << '\n';
    }
}

void write_matrix(const JndMatrix& matrix, const std::filesystem::path& path) {
    auto out = open_output(path);
    write_matrix(out, matrix);
    finish(out, path);
}

ModelParams ParamsDocument::model_params() const {
    ModelParams p;
    for (const auto& c : contents) {
        p.y.push_back(c.y);
        p.v_c.push_back(c.v_c);
    }
    for (const auto& s : subjects) {
        if (s.rejected) continue;
        p.b.push_back(s.b);
        p.v_s.push_back(s.v_s);
    }
    p.gauge = meta.gauge;
    return p;
}

std::vector<std::string> ParamsDocument::content_ids() const {
    std::vector<std::string> ids;
    for (const auto& c : contents) ids.push_back(c.id);
    return ids;
}

std::vector<std::string> ParamsDocument::retained_subject_ids() const {
    std::vector<std::string> ids;
    for (const auto& s : subjects) {
        if (!s.rejected) ids.push_back(s.id);
    }
    return ids;
}

std::optional<std::size_t> ParamsDocument::find_content(std::string_view id) const {
    for (std::size_t c = 0; c < contents.size(); ++c) {
        if (contents[c].id == id) return c;
    }
    return std::nullopt;
}

namespace {

void fill_fit(ParamsDocument& doc, const JndMatrix& matrix, const FitResult& fit) {
    for (std::size_t c = 0; c < matrix.n_contents(); ++c) {
        doc.contents.push_back({matrix.content_ids()[c], fit.params.y[c], fit.params.v_c[c],
                                c < fit.ci95_y.size() ? std::optional<double>(fit.ci95_y[c]) : std::nullopt});
    }
    doc.meta.gauge = fit.params.gauge;
    doc.meta.log_likelihood = fit.log_likelihood;
    doc.meta.converged = fit.converged;
    doc.meta.iterations = fit.iterations;
    doc.meta.ci_method = std::string(to_string(fit.ci_method));
    doc.meta.source = "fit";
}

SubjectEntry fitted_subject(const JndMatrix& matrix, const FitResult& fit, std::size_t k) {
    return {matrix.subject_ids()[k], fit.params.b[k], fit.params.v_s[k],
            k < fit.ci95_b.size() ? std::optional<double>(fit.ci95_b[k]) : std::nullopt, false, std::nullopt,
            std::nullopt};
}

}  // namespace

ParamsDocument make_params_document(const JndMatrix& matrix, const FitResult& fit) {
    ParamsDocument doc;
    fill_fit(doc, matrix, fit);
    for (std::size_t s = 0; s < matrix.n_subjects(); ++s) doc.subjects.push_back(fitted_subject(matrix, fit, s));
    return doc;
}

ParamsDocument make_params_document(const ScreeningResult& screening, const JndMatrix& original) {
    ParamsDocument doc;
    fill_fit(doc, screening.retained, screening.final_fit);
    doc.meta.source = "fit+screen";
    for (std::size_t s = 0; s < original.n_subjects(); ++s) {
        const auto kept = std::find(screening.retained_subjects.begin(), screening.retained_subjects.end(), s);
        if (kept != screening.retained_subjects.end()) {
            const auto k = static_cast<std::size_t>(kept - screening.retained_subjects.begin());
            doc.subjects.push_back(fitted_subject(screening.retained, screening.final_fit, k));
            continue;
        }
        const auto rej = std::find_if(screening.rejected.begin(), screening.rejected.end(),
                                      [s](const RejectedSubject& r) { return r.subject == s; });
        doc.subjects.push_back({original.subject_ids()[s], rej->b, rej->v_s, std::nullopt, true, rej->round,
                                std::string(to_string(rej->reason))});
    }
    return doc;
}

ParamsDocument make_truth_document(const JndMatrix& matrix, const ModelParams& truth, std::uint64_t seed) {
    ParamsDocument doc;
    for (std::size_t c = 0; c < matrix.n_contents(); ++c) {
        doc.contents.push_back({matrix.content_ids()[c], truth.y[c], truth.v_c[c], std::nullopt});
    }
    for (std::size_t s = 0; s < matrix.n_subjects(); ++s) {
        doc.subjects.push_back({matrix.subject_ids()[s], truth.b[s], truth.v_s[s], std::nullopt, false, std::nullopt,
                                std::nullopt});
    }
    doc.meta.gauge = truth.gauge;
    doc.meta.seed = seed;
    doc.meta.source = "simulate";
    return doc;
}

namespace {

template <typename T>
json optional_json(const std::optional<T>& value) {
    return value ? json(*value) : json(nullptr);
}

template <typename T>
std::optional<T> optional_field(const json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    return it->get<T>();
}

double finite_field(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj.at(key).is_number()) {
        throw DomainError(where + ": missing numeric field '" + key + "'");
    }
    const double v = obj.at(key).get<double>();
    if (!std::isfinite(v)) throw DomainError(where + ": field '" + key + "' is not finite");
    return v;
}

}  // namespace

std::string params_to_text(const ParamsDocument& doc) {
    json contents = json::array();
    for (const auto& c : doc.contents) {
        contents.push_back({{"id", c.id}, {"y", c.y}, {"v_c", c.v_c}, {"ci95_y", optional_json(c.ci95_y)}});
    }
    json subjects = json::array();
    for (const auto& s : doc.subjects) {
        json entry = {{"id", s.id}, {"b", s.b}, {"v_s", s.v_s}, {"ci95_b", optional_json(s.ci95_b)},
                      {"rejected", s.rejected}};
        if (s.rejection_round) entry["rejection_round"] = *s.rejection_round;
        if (s.rejection_reason) entry["rejection_reason"] = *s.rejection_reason;
        subjects.push_back(std::move(entry));
    }
    json meta = {{"gauge", std::string(to_string(doc.meta.gauge))}, {"tool_version", doc.meta.tool_version}};
    if (doc.meta.log_likelihood) meta["log_likelihood"] = *doc.meta.log_likelihood;
    if (doc.meta.converged) meta["converged"] = *doc.meta.converged;
    if (doc.meta.iterations) meta["iterations"] = *doc.meta.iterations;
    if (doc.meta.ci_method) meta["ci_method"] = *doc.meta.ci_method;
    if (doc.meta.seed) meta["seed"] = *doc.meta.seed;
    if (doc.meta.source) meta["source"] = *doc.meta.source;
    const json root = {{"contents", contents}, {"subjects", subjects}, {"meta", meta}};
    return root.dump(2) + "\n";
}

ParamsDocument params_from_text(const std::string& text, const std::string& source) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(source, 0, 0, e.what());
    }
    try {
        ParamsDocument doc;
        if (!root.is_object() || !root.contains("contents") || !root.at("contents").is_array()) {
            throw DomainError("missing 'contents' array");
        }
        std::unordered_set<std::string> seen;
        for (const auto& c : root.at("contents")) {
            ContentEntry entry;
            entry.id = c.at("id").get<std::string>();
            const auto where = "content '" + entry.id + "'";
            if (!seen.insert(entry.id).second) throw DomainError("duplicate " + where);
            entry.y = finite_field(c, "y", where);
            entry.v_c = finite_field(c, "v_c", where);
            if (entry.v_c < 0.0) throw DomainError(where + ": v_c is negative");
            entry.ci95_y = optional_field<double>(c, "ci95_y");
            doc.contents.push_back(std::move(entry));
        }
        seen.clear();
        if (root.contains("subjects")) {
            for (const auto& s : root.at("subjects")) {
                SubjectEntry entry;
                entry.id = s.at("id").get<std::string>();
                const auto where = "subject '" + entry.id + "'";
                if (!seen.insert(entry.id).second) throw DomainError("duplicate " + where);
                entry.b = finite_field(s, "b", where);
                entry.v_s = finite_field(s, "v_s", where);
                if (entry.v_s < 0.0) throw DomainError(where + ": v_s is negative");
                entry.ci95_b = optional_field<double>(s, "ci95_b");
                entry.rejected = s.value("rejected", false);
                entry.rejection_round = optional_field<int>(s, "rejection_round");
                entry.rejection_reason = optional_field<std::string>(s, "rejection_reason");
                doc.subjects.push_back(std::move(entry));
            }
        }
        if (root.contains("meta")) {
            const auto& m = root.at("meta");
            doc.meta.gauge = gauge_from_string(m.value("gauge", std::string("mean_bias_zero")));
            doc.meta.log_likelihood = optional_field<double>(m, "log_likelihood");
            doc.meta.converged = optional_field<bool>(m, "converged");
            doc.meta.iterations = optional_field<int>(m, "iterations");
            doc.meta.ci_method = optional_field<std::string>(m, "ci_method");
            doc.meta.tool_version = m.value("tool_version", std::string(kToolVersion));
            doc.meta.seed = optional_field<std::uint64_t>(m, "seed");
            doc.meta.source = optional_field<std::string>(m, "source");
        }
        return doc;
    } catch (const json::exception& e) {
        throw ParseError(source, 0, 0, e.what());
    } catch (const DomainError& e) {
        throw ParseError(source, 0, 0, e.what());
    }
}

ParamsDocument read_params(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return params_from_text(buffer.str(), path.string());
}

void write_params(const ParamsDocument& doc, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << params_to_text(doc);
    finish(out, path);
}

void write_traces(std::ostream& out, const JndMatrix& matrix, const std::vector<BisectionTrace>& traces) {
    if (traces.size() != matrix.n_contents() * matrix.n_subjects()) {
        throw DimensionMismatch("one trace per cell expected");
    }
    out << "# " << kBisectionConvention << '\n';
    out << "content,subject,anchor";
    for (int k = 1; k <= kBisectionRounds; ++k) out << ",probe" << k << ",noticeable" << k;
    out << ",result,saturated\n";
    for (std::size_t c = 0; c < matrix.n_contents(); ++c) {
        for (std::size_t s = 0; s < matrix.n_subjects(); ++s) {
            const auto& t = traces[c * matrix.n_subjects() + s];
            out << matrix.content_ids()[c] << ',' << matrix.subject_ids()[s] << ',' << t.anchor;
            for (const auto& cmp : t.comparisons) out << ',' << cmp.probe << ',' << (cmp.noticeable ? 1 : 0);
            out << ',' << format_real(t.result) << ',' << (t.saturated ? 1 : 0) << '\n';
        }
    }
}

void write_traces(const JndMatrix& matrix, const std::vector<BisectionTrace>& traces,
                  const std::filesystem::path& path) {
    auto out = open_output(path);
    write_traces(out, matrix, traces);
    finish(out, path);
}

void write_curves(std::ostream& out, const std::vector<SurCurve>& curves, const std::vector<std::string>& headers) {
    if (curves.empty()) throw DomainError("no curves to write");
    if (headers.size() != curves.size()) throw DimensionMismatch("one header per curve expected");
    const auto n = curves.front().points.size();
    for (const auto& curve : curves) {
        if (curve.points.size() != n) throw DimensionMismatch("curves do not share a grid");
    }
    out << "qp";
    for (const auto& h : headers) out << ',' << h;
    out << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        out << format_real(curves.front().points[i].qp);
        for (const auto& curve : curves) out << ',' << format_real(curve.points[i].sur);
        out << '\n';
    }
}

}  // namespace jnd
