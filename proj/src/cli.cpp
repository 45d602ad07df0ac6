#include "jnd/cli.hpp"

#include "jnd/error.hpp"
#include "jnd/inference.hpp"
#include "jnd/io.hpp"
#include "jnd/screening.hpp"
#include "jnd/simulator.hpp"
#include "jnd/sur.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace jnd::cli {

namespace {

double parse_number(std::string_view text, const std::string& what) {
    double value = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    if (!text.empty() && text.front() == '+') ++first;
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last) {
        throw DomainError("cannot read '" + std::string(text) + "' as a number in " + what);
    }
    return value;
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        parts.emplace_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

std::string lower(std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
}

std::string upper(std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return s;
}

Range parse_range(std::string_view text, const std::string& what) {
    const auto parts = split(text, ':');
    if (parts.size() != 2) throw DomainError(what + " must look like lo:hi, got '" + std::string(text) + "'");
    return {parse_number(parts[0], what), parse_number(parts[1], what)};
}

// "y=20:40,vc=0.5:4,b=-4:4,vs=0:3.5"; unnamed factors keep their defaults.
void apply_ranges(std::string_view text, PanelSpec& spec) {
    for (const auto& item : split(text, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw DomainError("range item '" + item + "' must look like name=lo:hi");
        const auto name = lower(item.substr(0, eq));
        const auto range = parse_range(std::string_view(item).substr(eq + 1), "--ranges " + name);
        if (name == "y") {
            spec.y = range;
        } else if (name == "vc" || name == "v_c") {
            spec.v_c = range;
        } else if (name == "b") {
            spec.b = range;
        } else if (name == "vs" || name == "v_s") {
            spec.v_s = range;
        } else {
            throw DomainError("unknown factor '" + name + "' in --ranges (use y, vc, b, vs)");
        }
    }
}

// "subject:b:v_s" with a 1-based subject position.
PlantedSubject parse_planted(std::string_view text) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw DomainError("--plant must look like subject:b:v_s, got '" + std::string(text) + "'");
    const double position = parse_number(parts[0], "--plant");
    if (position < 1 || position != std::floor(position)) throw DomainError("--plant subject must be a positive integer");
    return {static_cast<std::size_t>(position) - 1, parse_number(parts[1], "--plant"),
            parse_number(parts[2], "--plant")};
}

std::vector<double> parse_grid(std::string_view text) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw DomainError("--grid must look like lo:hi:step, got '" + std::string(text) + "'");
    auto grid = make_grid(parse_number(parts[0], "--grid"), parse_number(parts[1], "--grid"),
                          parse_number(parts[2], "--grid"));
    validate_grid(grid);
    return grid;
}

std::string fixed(double value, int digits = 3) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << value;
    return os.str();
}

struct SimulateOptions {
    std::size_t contents = 15;
    std::size_t subjects = 32;
    std::string ranges;
    std::uint64_t seed = 0;
    std::string mode = "fixed";
    double comparison_sigma = 0.0;
    int anchor = 0;
    std::vector<std::string> plant;
    std::string out_dir;
};

int run_simulate(const SimulateOptions& opt, std::ostream& out) {
    PanelSpec spec;
    spec.n_contents = opt.contents;
    spec.n_subjects = opt.subjects;
    if (!opt.ranges.empty()) apply_ranges(opt.ranges, spec);
    spec.seed = opt.seed;
    spec.mode = response_mode_from_string(opt.mode);
    spec.comparison_sigma = opt.comparison_sigma;
    spec.anchor = opt.anchor;
    for (const auto& p : opt.plant) spec.planted.push_back(parse_planted(p));

    const Session session = run_session(spec);
    const std::filesystem::path dir(opt.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());

    write_matrix(session.matrix, dir / "matrix.csv");
    write_params(make_truth_document(session.matrix, session.truth, spec.seed), dir / "truth.json");
    write_traces(session.matrix, session.traces, dir / "traces.csv");

    std::size_t saturated = 0;
    for (const auto& t : session.traces) saturated += t.saturated;
    out << "simulated " << spec.n_contents << " contents x " << spec.n_subjects << " subjects (seed " << spec.seed
        << ", mode " << to_string(spec.mode) << ", " << saturated << " saturated searches)\n";
    out << "wrote " << (dir / "matrix.csv").string() << ", " << (dir / "truth.json").string() << ", "
        << (dir / "traces.csv").string() << '\n';
    return kOk;
}

struct FitOptions {
    std::string matrix;
    bool screen = false;
    bool screen_only = false;
    double bias_limit = 4.0;
    double inconsistency_limit = 3.5;
    int max_rounds = 5;
    double tolerance = 1e-9;
    int max_iterations = 500;
    int restarts = 3;
    std::uint64_t seed = 0;
    double variance_floor = 1e-4;
    int bootstrap = 500;
    std::string out;
    std::string retained;
};

void print_fit(std::ostream& out, const ParamsDocument& doc, const FitResult& fit, bool print_factors) {
    out << "converged: " << (fit.converged ? "yes" : "no") << " (" << fit.iterations
        << " sweeps, log-likelihood " << fixed(fit.log_likelihood, 4) << ", " << to_string(fit.ci_method)
        << " intervals)\n";
    for (const auto& w : fit.warnings) out << "warning: " << w << '\n';
    if (print_factors) {
        out << "contents:\n";
        for (const auto& c : doc.contents) {
            out << "  " << c.id << "  y = " << fixed(c.y) << " +/- " << fixed(c.ci95_y.value_or(0.0))
                << "  v_c = " << fixed(c.v_c) << '\n';
        }
        out << "subjects:\n";
        for (const auto& s : doc.subjects) {
            if (s.rejected) continue;
            out << "  " << s.id << "  b = " << fixed(s.b) << " +/- " << fixed(s.ci95_b.value_or(0.0))
                << "  v_s = " << fixed(s.v_s) << '\n';
        }
    }
    std::vector<const SubjectEntry*> rejected;
    for (const auto& s : doc.subjects) {
        if (s.rejected) rejected.push_back(&s);
    }
    out << "rejected:";
    if (rejected.empty()) out << " none";
    out << '\n';
    for (const auto* s : rejected) {
        out << "  " << s->id << "  (" << s->rejection_reason.value_or("") << ", round "
            << s->rejection_round.value_or(0) << ")  b = " << fixed(s->b) << "  v_s = " << fixed(s->v_s) << '\n';
    }
}

int run_fit(const FitOptions& opt, std::ostream& out) {
    const JndMatrix matrix = read_matrix(opt.matrix);
    FitConfig config;
    config.tolerance = opt.tolerance;
    config.max_iterations = opt.max_iterations;
    config.restarts = opt.restarts;
    config.seed = opt.seed;
    config.variance_floor = opt.variance_floor;
    config.bootstrap_resamples = opt.bootstrap;

    ParamsDocument doc;
    FitResult fit;
    if (opt.screen || opt.screen_only) {
        ScreeningPolicy policy{opt.bias_limit, opt.inconsistency_limit, opt.max_rounds};
        ScreeningResult screening = screen_subjects(matrix, policy, config);
        doc = make_params_document(screening, matrix);
        fit = screening.final_fit;
        out << "screening: " << screening.rejected.size() << " of " << matrix.n_subjects() << " subjects rejected in "
            << screening.rounds << " round(s)\n";
        if (!opt.retained.empty()) write_matrix(screening.retained, opt.retained);
    } else {
        fit = fit_mle(matrix, config);
        doc = make_params_document(matrix, fit);
    }
    doc.meta.seed = opt.seed;
    print_fit(out, doc, fit, !opt.screen_only);
    if (!opt.out.empty()) write_params(doc, opt.out);
    return fit.converged ? kOk : kNotConverged;
}

struct SurOptions {
    std::string params;
    std::vector<std::string> contents;
    std::string groups;
    std::string cuts;
    bool tertiles = false;
    std::string group_bias;
    double group_inconsistency = -1.0;
    std::string grid = "0:51:0.25";
    std::optional<double> target;
    bool mixture = false;
    std::string out;
};

// One curve source per requested group.
struct GroupSpec {
    std::string name;
    std::optional<SubjectGroup> members;  // empty for explicit (b, v_s) groups
    GroupParams factors;
};

std::vector<GroupSpec> resolve_groups(const SurOptions& opt, const ModelParams& params, std::ostream& err) {
    std::vector<GroupSpec> specs;
    if (!opt.group_bias.empty()) {
        if (opt.mixture) throw DomainError("--mixture needs fitted subjects; it cannot be combined with --group-bias");
        if (!(opt.group_inconsistency >= 0.0)) {
            throw DomainError("--group-bias needs --group-inconsistency");
        }
        for (const auto& item : split(opt.group_bias, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos || eq == 0) throw DomainError("--group-bias items must look like NAME=b");
            specs.push_back({upper(item.substr(0, eq)), std::nullopt,
                             {parse_number(std::string_view(item).substr(eq + 1), "--group-bias"),
                              opt.group_inconsistency}});
        }
        return specs;
    }

    if (params.b.empty()) throw DomainError("params document has no retained subjects to group");
    GroupCuts cuts;
    if (opt.tertiles) {
        cuts = tertile_cuts(params);
    } else if (!opt.cuts.empty()) {
        const auto r = parse_range(opt.cuts, "--cuts");
        cuts = {r.lo, r.hi};
    }
    const Segmentation seg = segment_groups(params, cuts);

    const bool defaulted = opt.groups.empty();
    const auto names = split(defaulted ? std::string("hs,ns,es") : opt.groups, ',');
    for (const auto& raw : names) {
        const auto name = upper(raw);
        std::optional<SubjectGroup> group;
        if (name == "ALL") {
            group = all_subjects_group(params);
        } else if (name == "HS" || name == "NS" || name == "ES") {
            for (const auto& g : seg.groups) {
                if (g.name == name) group = g;
            }
            if (!group) {
                if (!defaulted) throw DomainError("group " + name + " is empty under the chosen cuts");
                err << "note: " << name << " group is empty and was omitted\n";
                continue;
            }
        } else {
            throw DomainError("unknown group '" + raw + "' (use hs, ns, es, all)");
        }
        specs.push_back({name, group, group_params(params, *group)});
    }
    if (specs.empty()) throw DomainError("no non-empty group to report");
    return specs;
}

int run_sur(const SurOptions& opt, std::ostream& out, std::ostream& err) {
    const ParamsDocument doc = read_params(opt.params);
    const ModelParams params = doc.model_params();
    if (opt.target && !(*opt.target > 0.0 && *opt.target < 1.0)) {
        throw DomainError("--target must lie in (0, 1)");
    }

    std::vector<std::string> content_ids;
    for (const auto& entry : opt.contents) {
        for (auto& id : split(entry, ',')) {
            if (!id.empty()) content_ids.push_back(std::move(id));
        }
    }
    if (content_ids.empty()) throw DomainError("--content is required");
    std::vector<std::size_t> contents;
    for (const auto& id : content_ids) {
        const auto c = doc.find_content(id);
        if (!c) throw DomainError("unknown content '" + id + "'");
        contents.push_back(*c);
    }

    const auto groups = resolve_groups(opt, params, err);

    std::ofstream file;
    std::ostream* sink = &out;
    if (!opt.out.empty()) {
        file.open(opt.out, std::ios::binary | std::ios::trunc);
        if (!file) throw IoError("cannot open '" + opt.out + "' for writing");
        sink = &file;
    }

    if (opt.target) {
        *sink << "content,group,target,qp\n";
        for (std::size_t k = 0; k < contents.size(); ++k) {
            for (const auto& g : groups) {
                const double qp = opt.mixture ? qp_for_target_sur_mixture(params, contents[k], *g.members, *opt.target)
                                              : qp_for_target_sur(curve_params(params, contents[k], g.factors),
                                                                  *opt.target);
                *sink << content_ids[k] << ',' << g.name << ',' << format_real(*opt.target) << ','
                      << format_real(qp) << '\n';
            }
        }
    } else {
        const auto grid = parse_grid(opt.grid);
        std::vector<SurCurve> curves;
        std::vector<std::string> headers;
        for (std::size_t k = 0; k < contents.size(); ++k) {
            for (const auto& g : groups) {
                if (opt.mixture) {
                    curves.push_back(sample_mixture_curve(params, contents[k], *g.members, grid, content_ids[k]));
                } else {
                    curves.push_back(
                        sample_curve(curve_params(params, contents[k], g.factors), grid, content_ids[k], g.name));
                }
                headers.push_back(contents.size() == 1 ? g.name : content_ids[k] + ":" + g.name);
            }
        }
        write_curves(*sink, curves, headers);
    }
    sink->flush();
    if (!*sink) throw IoError("failed writing SUR output");
    return kOk;
}

void add_fit_options(CLI::App& cmd, FitOptions& opt) {
    cmd.add_option("matrix", opt.matrix, "JND matrix CSV")->required();
    cmd.add_option("--bias-limit", opt.bias_limit, "Reject subjects with |b| above this (QP)");
    cmd.add_option("--inconsistency-limit", opt.inconsistency_limit, "Reject subjects with v_s above this (QP)");
    cmd.add_option("--max-rounds", opt.max_rounds, "Maximum screening rounds");
    cmd.add_option("--tol", opt.tolerance, "Relative log-likelihood change that ends the fit");
    cmd.add_option("--max-iter", opt.max_iterations, "Maximum sweeps per start");
    cmd.add_option("--restarts", opt.restarts, "Perturbed restarts besides the default start");
    cmd.add_option("--seed", opt.seed, "Seed for restarts and bootstrap resampling");
    cmd.add_option("--variance-floor", opt.variance_floor, "Lower bound on v_c^2 and v_s^2 (QP^2)");
    cmd.add_option("--bootstrap", opt.bootstrap, "Resamples for the bootstrap interval fallback");
    cmd.add_option("-o,--out", opt.out, "Write the params document here");
    cmd.add_option("--retained", opt.retained, "Write the screened matrix here");
}

void add_sur_options(CLI::App& cmd, SurOptions& opt) {
    cmd.add_option("params", opt.params, "Params document (JSON)")->required();
    cmd.add_option("--content", opt.contents, "Content id(s); repeat or comma-separate")->required();
    cmd.add_option("--groups", opt.groups, "Groups to report: hs,ns,es,all (default hs,ns,es)");
    cmd.add_option("--cuts", opt.cuts, "Bias cuts hs:es for grouping (default -1:1)");
    cmd.add_flag("--tertiles", opt.tertiles, "Cut groups at the bias tertiles");
    cmd.add_option("--group-bias", opt.group_bias, "Explicit groups NAME=b,... instead of fitted subjects");
    cmd.add_option("--group-inconsistency", opt.group_inconsistency, "v_s used with --group-bias");
    cmd.add_option("--grid", opt.grid, "QP grid lo:hi:step");
    cmd.add_flag("--mixture", opt.mixture, "Average per-subject curves instead of the aggregated group curve");
    cmd.add_option("-o,--out", opt.out, "Write CSV here instead of stdout");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fit JND user models, screen subjects and compute satisfied-user-ratio curves", "jndsur"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate", "Simulate a panel with the six-round bisection protocol");
    simulate->add_option("--contents", sim.contents, "Number of contents");
    simulate->add_option("--subjects", sim.subjects, "Number of subjects");
    simulate->add_option("--ranges", sim.ranges, "Factor ranges, e.g. y=20:40,vc=0.5:4,b=-4:4,vs=0:3.5");
    simulate->add_option("--seed", sim.seed, "Random seed");
    simulate->add_option("--mode", sim.mode, "Response mode: fixed | per-comparison");
    simulate->add_option("--comparison-sigma", sim.comparison_sigma, "Per-comparison noise (QP)");
    simulate->add_option("--anchor", sim.anchor, "Anchor QP of the search (0 = first JND)");
    simulate->add_option("--plant", sim.plant, "Force subject factors: subject:b:v_s (1-based, repeatable)");
    simulate->add_option("-o,--out", sim.out_dir, "Output directory")->required();

    FitOptions fit_opt;
    auto* fit = app.add_subcommand("fit", "Fit the model by maximum likelihood");
    add_fit_options(*fit, fit_opt);
    fit->add_flag("--screen", fit_opt.screen, "Reject unreliable subjects before the final fit");
    fit->add_flag("--screen-only", fit_opt.screen_only, "Report only the screening outcome");

    FitOptions screen_opt;
    screen_opt.screen_only = true;
    auto* screen = app.add_subcommand("screen", "Alias of fit --screen-only");
    add_fit_options(*screen, screen_opt);

    SurOptions sur_opt;
    double sur_target = 0.0;
    auto* sur = app.add_subcommand("sur", "Emit SUR curves or target QPs per group");
    add_sur_options(*sur, sur_opt);
    auto* sur_target_opt = sur->add_option("--target", sur_target, "Report the QP reaching this SUR instead of curves");

    SurOptions invert_opt;
    double invert_target = 0.0;
    auto* invert = app.add_subcommand("invert", "Alias of sur --target");
    add_sur_options(*invert, invert_opt);
    invert->add_option("--target", invert_target, "Target SUR in (0, 1)")->required();

    std::vector<std::string> reversed(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(reversed.begin(), reversed.end());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kOk : kUsage;
    }

    try {
        if (simulate->parsed()) return run_simulate(sim, out);
        if (fit->parsed()) return run_fit(fit_opt, out);
        if (screen->parsed()) return run_fit(screen_opt, out);
        if (sur->parsed()) {
            if (sur_target_opt->count() > 0) sur_opt.target = sur_target;
            return run_sur(sur_opt, out, err);
        }
        if (invert->parsed()) {
            invert_opt.target = invert_target;
            return run_sur(invert_opt, out, err);
        }
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const InsufficientData& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const SingularInformation& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kDomainError;
    }
    return kUsage;
}

}  // namespace jnd::cli
