#include "registrylint/report.hpp"

#include "registrylint/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

namespace registrylint {

namespace {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

const FieldSpec& require_field(std::string_view column)
{
    const auto* f = find_field(column);
    if (f == nullptr) {
        throw ReportError("unknown column '" + std::string(column) + "'");
    }
    return *f;
}

Completeness make_completeness(std::uint64_t non_null, std::uint64_t total)
{
    Completeness c;
    c.non_null = non_null;
    c.total = total;
    c.empty = total == 0;
    c.fraction = total == 0 ? 1.0 : static_cast<double>(non_null) / static_cast<double>(total);
    return c;
}

bool passes_filter(const FailureRecord& f, std::span<const int> tests)
{
    if (tests.empty()) {
        return !f.outcomes.empty();
    }
    return std::any_of(tests.begin(), tests.end(), [&](int k) { return f.outcome(k) != nullptr; });
}

/// Failure rows of one technology that count as distinct units (first row per unit id).
template <typename Fn>
void for_each_unit(std::span<const FailureRecord> failures, Technology technology, std::span<const int> tests,
                   bool dso_only, Fn&& fn)
{
    std::set<std::string_view> seen;
    for (const auto& f : failures) {
        if (f.technology != technology || (dso_only && !f.grid_operator_inspection) || !passes_filter(f, tests)) {
            continue;
        }
        if (!f.unit_id.empty() && !seen.insert(f.unit_id).second) {
            continue;
        }
        fn(f);
    }
}

std::string opt_text(const std::optional<std::string>& v)
{
    return v.value_or("");
}

std::string opt_number(const std::optional<double>& v)
{
    return v ? format_number(*v) : std::string();
}

template <typename T>
ojson nullable(const std::optional<T>& v)
{
    return v ? ojson(*v) : ojson(nullptr);
}

ojson summary_json(const TechnologySummary& s)
{
    ojson j;
    j["unit_count"] = s.unit_count;
    j["failing_unit_count"] = s.failing_unit_count;
    j["failure_share"] = s.failure_share;
    j["accumulated_failing_power_kw"] = s.accumulated_failing_power_kw;
    ojson per_test = ojson::object();
    for (int k = kFirstTest; k <= kLastTest; ++k) {
        if (test_applies(k, s.technology)) {
            per_test[std::to_string(k)] = s.failing_units_per_test[static_cast<std::size_t>(k)];
        }
    }
    j["failing_units_per_test"] = std::move(per_test);
    return j;
}

std::string histogram_label(const HistogramBin& b)
{
    if (b.overflow) {
        return ">=" + format_number(b.lower_km);
    }
    return "[" + format_number(b.lower_km) + "," + format_number(b.upper_km) + ")";
}

TechnologySummary summarize(std::span<const FailureRecord> failures, const UnitTotals& totals, Technology t,
                            bool dso_only)
{
    TechnologySummary s;
    s.technology = t;
    const auto share = error_share(failures, totals, t, {}, dso_only);
    s.unit_count = share.total_units;
    s.failing_unit_count = share.failing_units;
    s.failure_share = share.share;
    s.accumulated_failing_power_kw = share.accumulated_power_kw;
    for (int k = kFirstTest; k <= kLastTest; ++k) {
        const int filter[] = {k};
        std::uint64_t n = 0;
        for_each_unit(failures, t, filter, dso_only, [&](const FailureRecord&) { ++n; });
        s.failing_units_per_test[static_cast<std::size_t>(k)] = n;
    }
    return s;
}

} // namespace

Completeness completeness(std::span<const UnitRecord> records, std::string_view column)
{
    const auto& field = require_field(column);
    std::uint64_t non_null = 0;
    for (const auto& r : records) {
        if (!is_null(r, field)) {
            ++non_null;
        }
    }
    return make_completeness(non_null, records.size());
}

std::string completeness_percent(const Completeness& c)
{
    if (c.empty || c.non_null == c.total) {
        return "100";
    }
    auto pct = static_cast<long>(std::lround(c.fraction * 100.0));
    pct = std::min(pct, 99L);
    return std::to_string(pct);
}

// ---------------------------------------------------------------------------

namespace {

std::size_t catalog_index(std::string_view column)
{
    const auto* f = &require_field(column);
    return static_cast<std::size_t>(f - field_catalog().data());
}

} // namespace

UnitTotals::UnitTotals()
{
    for (auto& counts : non_null_) {
        counts.assign(field_catalog().size(), 0);
    }
}

void UnitTotals::add(const UnitRecord& record)
{
    const auto ti = index_of(record.technology);
    ++units_[ti];
    if (record.grid_operator_inspection.value_or(false)) {
        ++dso_units_[ti];
    }
    auto& counts = non_null_[ti];
    const auto catalog = field_catalog();
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        if (!is_null(record, catalog[i])) {
            ++counts[i];
        }
    }
}

void UnitTotals::add(std::span<const UnitRecord> records)
{
    for (const auto& r : records) {
        add(r);
    }
}

void UnitTotals::merge(const UnitTotals& other)
{
    for (std::size_t t = 0; t < 6; ++t) {
        units_[t] += other.units_[t];
        dso_units_[t] += other.dso_units_[t];
        for (std::size_t i = 0; i < non_null_[t].size(); ++i) {
            non_null_[t][i] += other.non_null_[t][i];
        }
    }
}

Completeness UnitTotals::completeness(Technology t, std::string_view column) const
{
    const auto i = catalog_index(column);
    return make_completeness(non_null_[index_of(t)][i], units_[index_of(t)]);
}

ojson UnitTotals::to_json() const
{
    ojson techs = ojson::object();
    const auto catalog = field_catalog();
    for (auto t : kAllTechnologies) {
        const auto ti = index_of(t);
        if (units_[ti] == 0) {
            continue;
        }
        ojson non_null = ojson::object();
        for (std::size_t i = 0; i < catalog.size(); ++i) {
            if (catalog[i].technologies.contains(t)) {
                non_null[std::string(catalog[i].name)] = non_null_[ti][i];
            }
        }
        techs[std::string(to_string(t))] = {{"units", units_[ti]}, {"dso_units", dso_units_[ti]}, {"non_null", non_null}};
    }
    ojson doc;
    doc["technologies"] = std::move(techs);
    return doc;
}

UnitTotals UnitTotals::from_json(const json& doc)
{
    UnitTotals totals;
    try {
        for (const auto& [name, entry] : doc.at("technologies").items()) {
            const auto t = parse_technology(name);
            if (!t) {
                throw ReportError("totals: unknown technology '" + name + "'");
            }
            const auto ti = index_of(*t);
            totals.units_[ti] = entry.at("units").get<std::uint64_t>();
            totals.dso_units_[ti] = entry.value("dso_units", std::uint64_t{0});
            if (entry.contains("non_null")) {
                for (const auto& [field, n] : entry["non_null"].items()) {
                    totals.non_null_[ti][catalog_index(field)] = n.get<std::uint64_t>();
                }
            }
        }
    } catch (const json::exception& e) {
        throw ReportError(std::string("totals: ") + e.what());
    }
    return totals;
}

// ---------------------------------------------------------------------------

ErrorShare error_share(std::span<const FailureRecord> failures, const UnitTotals& totals, Technology technology,
                       std::span<const int> tests, bool dso_only)
{
    ErrorShare out;
    out.total_units = dso_only ? totals.dso_units(technology) : totals.units(technology);
    if (out.total_units == 0) {
        throw ReportError("empty denominator");
    }
    for_each_unit(failures, technology, tests, dso_only, [&](const FailureRecord& f) {
        ++out.failing_units;
        out.accumulated_power_kw += f.power_kw.value_or(0.0);
    });
    out.share = static_cast<double>(out.failing_units) / static_cast<double>(out.total_units);
    return out;
}

std::uint64_t DistanceHistogram::total() const
{
    std::uint64_t n = 0;
    for (const auto& b : bins) {
        n += b.count;
    }
    return n;
}

DistanceHistogram distance_histogram(std::span<const double> distances_km, double bin_width_km, double overflow_km)
{
    if (!(bin_width_km > 0.0) || !std::isfinite(bin_width_km)) {
        throw ReportError("bin width must be positive");
    }
    if (!(overflow_km > 0.0) || !std::isfinite(overflow_km)) {
        throw ReportError("overflow distance must be positive");
    }
    DistanceHistogram h;
    h.bin_width_km = bin_width_km;
    h.overflow_km = overflow_km;
    std::size_t regular = 0;
    while (static_cast<double>(regular) * bin_width_km < overflow_km) {
        ++regular;
    }
    for (std::size_t k = 0; k < regular; ++k) {
        const double lo = static_cast<double>(k) * bin_width_km;
        h.bins.push_back({lo, std::min(lo + bin_width_km, overflow_km), 0, false});
    }
    h.bins.push_back({overflow_km, std::numeric_limits<double>::infinity(), 0, true});
    for (double d : distances_km) {
        if (d >= overflow_km) {
            ++h.bins.back().count;
            continue;
        }
        auto k = d <= 0.0 ? std::size_t{0} : static_cast<std::size_t>(std::floor(d / bin_width_km));
        k = std::min(k, regular - 1);
        // Guard the floor against rounding at bin edges.
        while (k > 0 && d < h.bins[k].lower_km) {
            --k;
        }
        while (k + 1 < regular && d >= h.bins[k].upper_km) {
            ++k;
        }
        ++h.bins[k].count;
    }
    return h;
}

std::vector<double> location_distances_km(std::span<const FailureRecord> failures, Technology technology, int test_id,
                                          bool dso_only)
{
    std::vector<double> out;
    for (const auto& f : failures) {
        if (f.technology != technology || (dso_only && !f.grid_operator_inspection)) {
            continue;
        }
        if (const auto* o = f.outcome(test_id); o != nullptr && o->measured) {
            out.push_back(*o->measured / 1000.0);
        }
    }
    return out;
}

double default_overflow_km(Technology technology)
{
    return ReportOptions{}.overflow_km[index_of(technology)];
}

// ---------------------------------------------------------------------------

QualityReport build_report(std::span<const FailureRecord> failures, const UnitTotals& totals,
                           const ReportOptions& options, const SuiteTally* tally)
{
    QualityReport report;
    report.scope = options.dso_only ? "dso_only" : "all";
    report.totals = totals;
    if (tally != nullptr) {
        report.tally = *tally;
    }
    for (auto t : kAllTechnologies) {
        if (totals.units(t) == 0) {
            continue;
        }
        if (!options.dso_only) {
            report.all.push_back(summarize(failures, totals, t, false));
        }
        if (totals.dso_units(t) > 0) {
            report.dso_only.push_back(summarize(failures, totals, t, true));
        }
        const auto distances = location_distances_km(failures, t, options.histogram_test, options.dso_only);
        report.histograms.emplace(t, distance_histogram(distances, options.bin_width_km, options.overflow_km[index_of(t)]));
    }
    return report;
}

ojson tally_to_json(const SuiteTally& tally)
{
    ojson evaluated = ojson::object();
    ojson failed = ojson::object();
    for (const auto& [k, t] : test_matrix()) {
        const auto key = std::to_string(k);
        const auto tech = std::string(to_string(t));
        evaluated[key][tech] = tally.evaluated[static_cast<std::size_t>(k)][index_of(t)];
        failed[key][tech] = tally.failed[static_cast<std::size_t>(k)][index_of(t)];
    }
    return {{"evaluated", evaluated}, {"failed", failed}};
}

SuiteTally tally_from_json(const json& doc)
{
    SuiteTally tally;
    auto read = [&](const char* key, auto& table) {
        if (!doc.contains(key)) {
            return;
        }
        for (const auto& [test, per_tech] : doc[key].items()) {
            const int k = std::stoi(test);
            if (k < kFirstTest || k > kLastTest) {
                throw ReportError("tally: unknown test id " + test);
            }
            for (const auto& [name, n] : per_tech.items()) {
                const auto t = parse_technology(name);
                if (!t) {
                    throw ReportError("tally: unknown technology '" + name + "'");
                }
                table[static_cast<std::size_t>(k)][index_of(*t)] = n.template get<std::uint64_t>();
            }
        }
    };
    try {
        read("evaluated", tally.evaluated);
        read("failed", tally.failed);
    } catch (const json::exception& e) {
        throw ReportError(std::string("tally: ") + e.what());
    }
    return tally;
}

ojson summary_json(const QualityReport& report)
{
    auto find = [](const std::vector<TechnologySummary>& list, Technology t) -> const TechnologySummary* {
        const auto it = std::find_if(list.begin(), list.end(), [&](const TechnologySummary& s) { return s.technology == t; });
        return it == list.end() ? nullptr : &*it;
    };
    const bool full = report.scope == "all";

    ojson doc;
    doc["scope"] = report.scope;
    doc["check_marks"] = check_mark_count();
    ojson techs = ojson::object();
    for (auto t : kAllTechnologies) {
        if (report.totals.units(t) == 0) {
            continue;
        }
        ojson entry;
        const auto* all = find(report.all, t);
        const auto* dso = find(report.dso_only, t);
        entry["all"] = all == nullptr ? ojson(nullptr) : summary_json(*all);
        entry["dso_only"] = dso == nullptr ? ojson(nullptr) : summary_json(*dso);
        if (full) {
            ojson comp = ojson::object();
            for (const auto& f : field_catalog()) {
                if (f.technologies.contains(t)) {
                    comp[std::string(f.name)] = report.totals.completeness(t, f.name).fraction;
                }
            }
            entry["completeness"] = std::move(comp);
        }
        if (const auto it = report.histograms.find(t); it != report.histograms.end()) {
            const auto& h = it->second;
            ojson bins = ojson::array();
            for (const auto& b : h.bins) {
                bins.push_back({{"label", histogram_label(b)},
                                {"lower_km", b.lower_km},
                                {"upper_km", b.overflow ? ojson(nullptr) : ojson(b.upper_km)},
                                {"count", b.count}});
            }
            entry["distance_histogram"] = {{"bin_width_km", h.bin_width_km}, {"overflow_km", h.overflow_km}, {"bins", bins}};
        }
        techs[std::string(to_string(t))] = std::move(entry);
    }
    doc["technologies"] = std::move(techs);
    if (report.tally) {
        doc["tally"] = tally_to_json(*report.tally);
    }
    return doc;
}

// ---------------------------------------------------------------------------

void write_failures_ndjson(std::ostream& out, std::span<const FailureRecord> failures)
{
    for (const auto& f : failures) {
        ojson outcomes = ojson::array();
        for (const auto& o : f.outcomes) {
            outcomes.push_back({{"test_id", o.test_id},
                                {"detail", o.detail},
                                {"measured", nullable(o.measured)},
                                {"measured_unit", o.measured_unit}});
        }
        ojson j;
        j["unit_id"] = f.unit_id;
        j["technology"] = to_string(f.technology);
        j["power_kw"] = nullable(f.power_kw);
        j["district_id"] = nullable(f.district_id);
        j["municipality_id"] = nullable(f.municipality_id);
        j["grid_operator_inspection"] = f.grid_operator_inspection;
        j["outcomes"] = std::move(outcomes);
        out << j.dump() << '\n';
    }
}

std::vector<FailureRecord> read_failures_ndjson(std::istream& in)
{
    std::vector<FailureRecord> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto j = json::parse(line);
            FailureRecord f;
            f.unit_id = j.at("unit_id").get<std::string>();
            const auto tech = parse_technology(j.at("technology").get<std::string>());
            if (!tech) {
                throw ReportError("unknown technology");
            }
            f.technology = *tech;
            if (!j.at("power_kw").is_null()) {
                f.power_kw = j["power_kw"].get<double>();
            }
            if (!j.at("district_id").is_null()) {
                f.district_id = j["district_id"].get<std::string>();
            }
            if (!j.at("municipality_id").is_null()) {
                f.municipality_id = j["municipality_id"].get<std::string>();
            }
            f.grid_operator_inspection = j.value("grid_operator_inspection", false);
            for (const auto& o : j.at("outcomes")) {
                RuleOutcome r;
                r.unit_id = f.unit_id;
                r.test_id = o.at("test_id").get<int>();
                r.passed = false;
                r.detail = o.value("detail", "");
                if (o.contains("measured") && !o["measured"].is_null()) {
                    r.measured = o["measured"].get<double>();
                }
                r.measured_unit = o.value("measured_unit", "");
                f.outcomes.push_back(std::move(r));
            }
            out.push_back(std::move(f));
        } catch (const std::exception& e) {
            throw ReportError("failures line " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

void write_failures_csv(std::ostream& out, std::span<const FailureRecord> failures)
{
    csv::write_row(out, {"unit_id", "technology", "test_ids", "detail", "measured", "measured_unit", "power_kw",
                         "district_id", "municipality_id"});
    for (const auto& f : failures) {
        std::string ids;
        std::string detail;
        std::string measured;
        std::string units;
        for (std::size_t i = 0; i < f.outcomes.size(); ++i) {
            const auto& o = f.outcomes[i];
            const char* sep = i == 0 ? "" : ";";
            ids += sep + std::to_string(o.test_id);
            detail += (i == 0 ? "" : " | ") + o.detail;
            measured += sep + opt_number(o.measured);
            units += sep + o.measured_unit;
        }
        csv::write_row(out, {f.unit_id, std::string(to_string(f.technology)), ids, detail, measured, units,
                             opt_number(f.power_kw), opt_text(f.district_id), opt_text(f.municipality_id)});
    }
}

void write_completeness_csv(std::ostream& out, const UnitTotals& totals)
{
    csv::write_row(out, {"technology", "field", "non_null", "total", "fraction", "percent", "empty"});
    for (auto t : kAllTechnologies) {
        if (totals.units(t) == 0) {
            continue;
        }
        for (const auto& f : field_catalog()) {
            if (!f.technologies.contains(t)) {
                continue;
            }
            const auto c = totals.completeness(t, f.name);
            csv::write_row(out, {std::string(to_string(t)), std::string(f.name), std::to_string(c.non_null),
                                 std::to_string(c.total), format_number(c.fraction), completeness_percent(c),
                                 c.empty ? "1" : "0"});
        }
    }
}

void write_histogram_csv(std::ostream& out, const DistanceHistogram& histogram)
{
    csv::write_row(out, {"label", "lower_km", "upper_km", "count"});
    for (const auto& b : histogram.bins) {
        csv::write_row(out, {histogram_label(b), format_number(b.lower_km), b.overflow ? "" : format_number(b.upper_km),
                             std::to_string(b.count)});
    }
}

void write_errors_by_district_csv(std::ostream& out, std::span<const FailureRecord> failures)
{
    struct Cell {
        std::uint64_t count = 0;
        double power_kw = 0.0;
    };
    std::map<std::tuple<std::string, Technology, int>, Cell> table;
    for (const auto& f : failures) {
        for (const auto& o : f.outcomes) {
            auto& cell = table[{f.district_id.value_or(""), f.technology, o.test_id}];
            ++cell.count;
            cell.power_kw += f.power_kw.value_or(0.0);
        }
    }
    csv::write_row(out, {"district_id", "technology", "test_id", "count", "accumulated_power_kw"});
    for (const auto& [key, cell] : table) {
        const auto& [district, tech, test] = key;
        csv::write_row(out, {district, std::string(to_string(tech)), std::to_string(test), std::to_string(cell.count),
                             format_number(cell.power_kw)});
    }
}

void write_completeness_table(std::ostream& out, const UnitTotals& totals)
{
    std::vector<Technology> present;
    for (auto t : kAllTechnologies) {
        if (totals.units(t) > 0) {
            present.push_back(t);
        }
    }
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"column"};
    for (auto t : present) {
        header.emplace_back(to_string(t));
    }
    rows.push_back(std::move(header));
    for (const auto& f : field_catalog()) {
        std::vector<std::string> row{std::string(f.name)};
        for (auto t : present) {
            row.push_back(f.technologies.contains(t) ? completeness_percent(totals.completeness(t, f.name)) : "x");
        }
        rows.push_back(std::move(row));
    }
    std::vector<std::size_t> width(rows.front().size(), 0);
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            width[i] = std::max(width[i], row[i].size());
        }
    }
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i == 0) {
                out << row[i] << std::string(width[i] - row[i].size(), ' ');
            } else {
                out << "  " << std::string(width[i] - row[i].size(), ' ') << row[i];
            }
        }
        out << '\n';
    }
}

StagedOutput::StagedOutput(std::filesystem::path out_dir)
: out_dir_(std::move(out_dir))
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir_, ec);
    if (ec) {
        throw ReportError("cannot create " + out_dir_.string() + ": " + ec.message());
    }
    staging_ = out_dir_ / ".registrylint-staging";
    fs::remove_all(staging_, ec);
    fs::create_directory(staging_, ec);
    if (ec) {
        throw ReportError("cannot create " + staging_.string() + ": " + ec.message());
    }
}

StagedOutput::~StagedOutput()
{
    files_.clear();
    std::error_code ec;
    std::filesystem::remove_all(staging_, ec);
}

std::ofstream& StagedOutput::open(const std::string& name)
{
    const auto path = staging_ / name;
    auto stream = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*stream) {
        throw ReportError("cannot write " + path.string());
    }
    files_.emplace_back(name, std::move(stream));
    return *files_.back().second;
}

void StagedOutput::commit()
{
    namespace fs = std::filesystem;
    for (auto& [name, stream] : files_) {
        stream->flush();
        if (!*stream) {
            throw ReportError("write failed: " + (staging_ / name).string());
        }
        stream->close();
    }
    for (const auto& [name, stream] : files_) {
        std::error_code ec;
        fs::rename(staging_ / name, out_dir_ / name, ec);
        if (ec) {
            throw ReportError("cannot move " + (out_dir_ / name).string() + " into place: " + ec.message());
        }
    }
    files_.clear();
    committed_ = true;
}

void export_report(StagedOutput& out, std::span<const FailureRecord> failures, const QualityReport& report,
                   const ExportSelection& selection)
{
    if (selection.failures) {
        write_failures_ndjson(out.open("failures.ndjson"), failures);
        write_failures_csv(out.open("failures.csv"), failures);
    }
    out.open("summary.json") << summary_json(report).dump(2) << '\n';
    if (selection.completeness && report.scope == "all") {
        write_completeness_csv(out.open("completeness.csv"), report.totals);
    }
    for (const auto& [t, h] : report.histograms) {
        write_histogram_csv(out.open("distance_histogram_" + std::string(to_string(t)) + ".csv"), h);
    }
    write_errors_by_district_csv(out.open("errors_by_district.csv"), failures);
    if (selection.totals) {
        auto doc = report.totals.to_json();
        if (report.tally) {
            doc["tally"] = tally_to_json(*report.tally);
        }
        out.open("totals.json") << doc.dump(2) << '\n';
    }
}

void export_report(const std::filesystem::path& out_dir, std::span<const FailureRecord> failures,
                   const QualityReport& report, const ExportSelection& selection)
{
    StagedOutput out(out_dir);
    export_report(out, failures, report, selection);
    out.commit();
}

} // namespace registrylint
