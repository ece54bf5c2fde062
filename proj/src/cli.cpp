#include "registrylint/cli.hpp"

#include "registrylint/csv.hpp"
#include "registrylint/ingest.hpp"
#include "registrylint/report.hpp"
#include "registrylint/rules.hpp"
#include "registrylint/settings.hpp"
#include "registrylint/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <thread>

namespace registrylint {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

/// Fatal problem reported with exit code 2.
class Fatal : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Technology technology_arg(const std::string& text)
{
    const auto t = parse_technology(text);
    if (!t) {
        throw Fatal("unknown technology '" + text + "'");
    }
    return *t;
}

/// "<tech>=<path>" pairs, in technology order.
std::map<Technology, fs::path> input_args(const std::vector<std::string>& items)
{
    std::map<Technology, fs::path> inputs;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
            throw Fatal("--input expects <technology>=<path>, got '" + item + "'");
        }
        const auto t = technology_arg(item.substr(0, eq));
        if (!inputs.emplace(t, item.substr(eq + 1)).second) {
            throw Fatal("--input given twice for " + std::string(to_string(t)));
        }
    }
    return inputs;
}

void require_file(const fs::path& path, const std::string& what)
{
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) {
        throw Fatal(what + " not found: " + path.string());
    }
}

Settings settings_from(const std::string& config_arg)
{
    std::string path = config_arg;
    if (path.empty()) {
        if (const char* env = std::getenv("REGISTRYLINT_CONFIG"); env != nullptr) {
            path = env;
        }
    }
    if (path.empty()) {
        return Settings{};
    }
    require_file(path, "config file");
    return load_settings(path);
}

void write_parse_issues(std::ostream& out, const std::vector<std::pair<Technology, ParseIssue>>& issues)
{
    csv::write_row(out, {"technology", "line", "column", "reason", "rejected"});
    for (const auto& [t, issue] : issues) {
        csv::write_row(out, {std::string(to_string(t)), std::to_string(issue.line), issue.column, issue.reason,
                             issue.rejected ? "true" : "false"});
    }
}

void print_tally(std::ostream& err, const SuiteTally& tally)
{
    for (int test = kFirstTest; test <= kLastTest; ++test) {
        const auto evaluated = tally.evaluated_total(test);
        if (evaluated == 0) {
            continue;
        }
        err << "test " << test << " (" << test_description(test) << "): " << tally.failed_total(test) << " failed of "
            << evaluated << '\n';
    }
}

// ---------------------------------------------------------------------------

struct ValidateArgs {
    std::vector<std::string> inputs;
    std::string districts;
    std::string municipalities;
    std::string config;
    std::string out;
    std::vector<std::string> technologies;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    std::optional<double> buffer_m;
    bool dso_only = false;
};

int cmd_validate(const ValidateArgs& a, std::ostream& out, std::ostream& err)
{
    using clock = std::chrono::steady_clock;
    const auto started = clock::now();

    auto settings = settings_from(a.config);
    if (a.buffer_m) {
        settings.rules.buffer_m = *a.buffer_m;
    }
    settings.report.dso_only = a.dso_only;
    settings.validate();
    if (a.jobs < 1) {
        throw Fatal("--jobs must be at least 1");
    }

    auto inputs = input_args(a.inputs);
    if (!a.technologies.empty()) {
        TechnologySet keep;
        for (const auto& t : a.technologies) {
            keep.insert(technology_arg(t));
        }
        std::erase_if(inputs, [&](const auto& kv) { return !keep.contains(kv.first); });
    }
    if (inputs.empty()) {
        throw Fatal("no input tables selected");
    }
    for (const auto& [t, path] : inputs) {
        require_file(path, std::string(to_string(t)) + " input");
    }

    std::optional<geo::SpatialIndex> districts;
    std::optional<geo::SpatialIndex> municipalities;
    if (!a.districts.empty()) {
        require_file(a.districts, "district boundary file");
        districts.emplace(parse_boundaries(fs::path(a.districts), geo::BoundaryLevel::District,
                                           settings.district_boundaries));
        err << "districts: " << districts->boundaries().size() << " regions\n";
    }
    if (!a.municipalities.empty()) {
        require_file(a.municipalities, "municipality boundary file");
        municipalities.emplace(parse_boundaries(fs::path(a.municipalities), geo::BoundaryLevel::Municipality,
                                                settings.municipality_boundaries));
        err << "municipalities: " << municipalities->boundaries().size() << " regions\n";
    }
    if (!districts || !municipalities) {
        err << "warning: location tests run only for the boundary levels given\n";
    }

    EvaluationContext ctx{settings.rules, districts ? &*districts : nullptr,
                          municipalities ? &*municipalities : nullptr};
    SuiteRunner runner(ctx, a.jobs);
    UnitTotals totals;
    std::vector<std::pair<Technology, ParseIssue>> issues;
    std::size_t rows = 0;

    for (const auto& [t, path] : inputs) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw Fatal("cannot open " + path.string());
        }
        RegistryReader reader(in, settings.mapping(t), settings.ingest);
        for (const auto& col : reader.absent_columns()) {
            err << to_string(t) << ": column '" << col << "' absent, field left empty\n";
        }
        std::vector<UnitRecord> chunk;
        std::vector<ParseIssue> chunk_issues;
        while (reader.next_chunk(chunk, chunk_issues)) {
            if (a.dso_only) {
                std::erase_if(chunk, [](const UnitRecord& r) { return r.grid_operator_inspection != true; });
            }
            totals.add(chunk);
            runner.consume(chunk);
        }
        for (auto& issue : chunk_issues) {
            issues.emplace_back(t, std::move(issue));
        }
        rows += reader.rows();
        err << to_string(t) << ": " << reader.rows() << " rows, " << reader.rejected_rows() << " rejected\n";
    }

    auto result = runner.finish();
    const auto report = build_report(result.failures, totals, settings.report, &result.tally);

    StagedOutput staged{fs::path(a.out)};
    export_report(staged, result.failures, report);
    write_parse_issues(staged.open("parse_issues.csv"), issues);
    staged.commit();

    print_tally(err, result.tally);
    const double seconds = std::chrono::duration<double>(clock::now() - started).count();
    err << result.records << " records evaluated in " << seconds << " s\n";

    ojson line;
    line["command"] = "validate";
    line["scope"] = report.scope;
    line["rows"] = rows;
    line["records"] = result.records;
    line["failing_units"] = result.failures.size();
    line["parse_issues"] = issues.size();
    line["check_marks"] = check_mark_count();
    line["out"] = a.out;
    out << line.dump() << '\n';
    return result.failures.empty() ? kExitClean : kExitFailuresFound;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::vector<std::string> technologies;
    long long count = 1000;
    std::uint64_t seed = 1;
    double error_rate = 0.0;
    std::string out;
    std::string config;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err)
{
    if (a.count < 0) {
        throw Fatal("--count must not be negative");
    }
    if (!(a.error_rate >= 0.0 && a.error_rate <= 1.0)) {
        throw Fatal("--error-rate must lie in [0, 1]");
    }
    auto settings = settings_from(a.config);
    settings.validate();

    std::vector<Technology> techs;
    for (const auto& t : a.technologies) {
        const auto tech = technology_arg(t);
        if (std::find(techs.begin(), techs.end(), tech) == techs.end()) {
            techs.push_back(tech);
        }
    }
    if (techs.empty()) {
        techs.assign(kAllTechnologies.begin(), kAllTechnologies.end());
    }

    const synth::SyntheticGrid grid;
    StagedOutput staged{fs::path(a.out)};
    ojson truth;
    truth["seed"] = a.seed;
    truth["error_rate"] = a.error_rate;
    truth["tables"] = ojson::array();
    std::size_t injected = 0;

    for (auto t : techs) {
        auto records = synth::generate_clean(t, static_cast<std::size_t>(a.count), a.seed, grid);
        synth::GroundTruth gt;
        gt.technology = t;
        gt.records = records.size();
        if (a.error_rate > 0.0) {
            auto result = synth::inject_errors(std::move(records), synth::ErrorInjectionSpec::uniform_rate(a.error_rate, t),
                                               a.seed, settings.rules, &grid);
            records = std::move(result.records);
            gt = std::move(result.truth);
        }
        write_registry(staged.open(std::string(to_string(t)) + ".csv"), records, settings.mapping(t),
                       settings.ingest.delimiter);
        injected += gt.injected.size();
        err << to_string(t) << ": " << records.size() << " records, " << gt.injected.size() << " injected errors\n";
        truth["tables"].push_back(gt.to_json());
    }
    staged.open("ground_truth.json") << truth.dump(2) << '\n';
    write_boundaries(staged.open("districts.geojson"), grid.districts());
    write_boundaries(staged.open("municipalities.geojson"), grid.municipalities());
    staged.commit();

    ojson line;
    line["command"] = "synth";
    line["technologies"] = ojson::array();
    for (auto t : techs) {
        line["technologies"].push_back(std::string(to_string(t)));
    }
    line["records_per_table"] = a.count;
    line["injected"] = injected;
    line["out"] = a.out;
    out << line.dump() << '\n';
    return kExitClean;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
    std::string failures;
    std::string totals;
    std::string out;
    std::string config;
    bool dso_only = false;
    std::optional<double> bin_width_km;
    std::optional<double> overflow_km;
};

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream& err)
{
    auto settings = settings_from(a.config);
    if (a.bin_width_km) {
        if (!(*a.bin_width_km > 0.0)) {
            throw Fatal("--bin-width must be positive");
        }
        settings.report.bin_width_km = *a.bin_width_km;
    }
    if (a.overflow_km) {
        if (!(*a.overflow_km > 0.0)) {
            throw Fatal("--overflow must be positive");
        }
        settings.report.overflow_km.fill(*a.overflow_km);
    }
    settings.report.dso_only = a.dso_only;

    require_file(a.failures, "failure file");
    const fs::path totals_path = a.totals.empty() ? fs::path(a.failures).parent_path() / "totals.json" : fs::path(a.totals);
    require_file(totals_path, "totals file");

    std::ifstream failures_in(a.failures, std::ios::binary);
    auto failures = read_failures_ndjson(failures_in);
    std::ifstream totals_in(totals_path, std::ios::binary);
    nlohmann::json totals_doc;
    try {
        totals_doc = nlohmann::json::parse(totals_in);
    } catch (const nlohmann::json::exception& e) {
        throw Fatal(totals_path.string() + ": " + e.what());
    }
    const auto totals = UnitTotals::from_json(totals_doc);
    std::optional<SuiteTally> tally;
    if (totals_doc.contains("tally") && !a.dso_only) {
        tally = tally_from_json(totals_doc["tally"]);
    }
    if (a.dso_only) {
        std::erase_if(failures, [](const FailureRecord& f) { return !f.grid_operator_inspection; });
    }

    const auto report = build_report(failures, totals, settings.report, tally ? &*tally : nullptr);
    ExportSelection selection;
    selection.failures = false;
    selection.totals = false;
    export_report(fs::path(a.out), failures, report, selection);
    err << failures.size() << " failing units reported\n";

    ojson line;
    line["command"] = "report";
    line["scope"] = report.scope;
    line["failing_units"] = failures.size();
    line["out"] = a.out;
    out << line.dump() << '\n';
    return kExitClean;
}

// ---------------------------------------------------------------------------

struct CompletenessArgs {
    std::vector<std::string> inputs;
    std::string config;
    std::string out;
};

int cmd_completeness(const CompletenessArgs& a, std::ostream& out, std::ostream& err)
{
    auto settings = settings_from(a.config);
    settings.validate();
    const auto inputs = input_args(a.inputs);
    if (inputs.empty()) {
        throw Fatal("no input tables given");
    }
    UnitTotals totals;
    for (const auto& [t, path] : inputs) {
        require_file(path, std::string(to_string(t)) + " input");
        std::ifstream in(path, std::ios::binary);
        RegistryReader reader(in, settings.mapping(t), settings.ingest);
        std::vector<UnitRecord> chunk;
        std::vector<ParseIssue> issues;
        while (reader.next_chunk(chunk, issues)) {
            totals.add(chunk);
        }
        err << to_string(t) << ": " << reader.rows() << " rows\n";
    }
    if (!a.out.empty()) {
        StagedOutput staged{fs::path(a.out)};
        write_completeness_csv(staged.open("completeness.csv"), totals);
        staged.commit();
    }
    write_completeness_table(out, totals);
    return kExitClean;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Data-quality validation for energy-unit registry exports", "registrylint"};
    app.require_subcommand(1);

    ValidateArgs va;
    auto* validate = app.add_subcommand("validate", "Run the test catalog over registry tables");
    validate->add_option("--input", va.inputs, "<technology>=<csv path>, repeatable")->required();
    validate->add_option("--districts", va.districts, "District boundaries (GeoJSON)");
    validate->add_option("--municipalities", va.municipalities, "Municipality boundaries (GeoJSON)");
    validate->add_option("--config", va.config, "Settings file (JSON); falls back to $REGISTRYLINT_CONFIG");
    validate->add_option("--out", va.out, "Output directory")->required();
    validate->add_option("--technology", va.technologies, "Only validate these technologies, repeatable");
    validate->add_option("--jobs", va.jobs, "Worker threads")->check(CLI::PositiveNumber);
    validate->add_option("--buffer-m", va.buffer_m, "Boundary buffer in meters")->check(CLI::NonNegativeNumber);
    validate->add_flag("--dso-only", va.dso_only, "Only units checked by the grid operator");

    SynthArgs sa;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic registry with labelled errors");
    synth_cmd->add_option("--technology", sa.technologies, "Technology to generate, repeatable; default all");
    synth_cmd->add_option("--count", sa.count, "Records per technology");
    synth_cmd->add_option("--seed", sa.seed, "Random seed");
    synth_cmd->add_option("--error-rate", sa.error_rate, "Fraction of records receiving an injected error");
    synth_cmd->add_option("--out", sa.out, "Output directory")->required();
    synth_cmd->add_option("--config", sa.config, "Settings file (JSON)");

    ReportArgs ra;
    std::optional<double> bin_width;
    std::optional<double> overflow;
    auto* report = app.add_subcommand("report", "Rebuild summaries from a previous validate run");
    report->add_option("--failures", ra.failures, "failures.ndjson of a validate run")->required();
    report->add_option("--totals", ra.totals, "totals.json; default next to the failure file");
    report->add_option("--out", ra.out, "Output directory")->required();
    report->add_option("--config", ra.config, "Settings file (JSON)");
    report->add_flag("--dso-only", ra.dso_only, "Only units checked by the grid operator");
    report->add_option("--bin-width", bin_width, "Histogram bin width in km");
    report->add_option("--overflow", overflow, "Histogram overflow threshold in km, all technologies");

    CompletenessArgs ca;
    auto* comp = app.add_subcommand("completeness", "Per-column completeness of registry tables");
    comp->add_option("--input", ca.inputs, "<technology>=<csv path>, repeatable")->required();
    comp->add_option("--config", ca.config, "Settings file (JSON)");
    comp->add_option("--out", ca.out, "Also write completeness.csv into this directory");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitClean : kExitFatal;
    }

    try {
        if (validate->parsed()) {
            return cmd_validate(va, out, err);
        }
        if (synth_cmd->parsed()) {
            return cmd_synth(sa, out, err);
        }
        if (report->parsed()) {
            ra.bin_width_km = bin_width;
            ra.overflow_km = overflow;
            return cmd_report(ra, out, err);
        }
        return cmd_completeness(ca, out, err);
    } catch (const std::exception& e) {
        err << "registrylint: " << e.what() << '\n';
        return kExitFatal;
    }
}

} // namespace registrylint
