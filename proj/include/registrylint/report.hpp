#pragma once

#include "registrylint/data_model.hpp"
#include "registrylint/rules.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace registrylint {

class ReportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Completeness {
    std::uint64_t non_null = 0;
    std::uint64_t total = 0;
    /// non_null / total; 1 for an empty table.
    double fraction = 1.0;
    bool empty = true;
};

/// Throws ReportError for an unknown column.
Completeness completeness(std::span<const UnitRecord> records, std::string_view column);

/// Integer percent as shown in dataset overviews: nearest integer, but never "100" unless nothing is null.
std::string completeness_percent(const Completeness& c);

/// Per-technology unit counts and non-null counts: enough to compute completeness and
/// error-share denominators without keeping the records.
class UnitTotals {
public:
    UnitTotals();

    void add(const UnitRecord& record);
    void add(std::span<const UnitRecord> records);
    void merge(const UnitTotals& other);

    std::uint64_t units(Technology t) const { return units_[index_of(t)]; }
    std::uint64_t dso_units(Technology t) const { return dso_units_[index_of(t)]; }
    /// Throws ReportError for an unknown column.
    Completeness completeness(Technology t, std::string_view column) const;

    nlohmann::ordered_json to_json() const;
    static UnitTotals from_json(const nlohmann::json& doc);

    bool operator==(const UnitTotals&) const = default;

private:
    std::array<std::uint64_t, 6> units_{};
    std::array<std::uint64_t, 6> dso_units_{};
    /// Indexed by position in field_catalog().
    std::array<std::vector<std::uint64_t>, 6> non_null_{};
};

struct ErrorShare {
    double share = 0.0;
    double accumulated_power_kw = 0.0;
    std::uint64_t failing_units = 0;
    std::uint64_t total_units = 0;
};

/// Share of units of one technology failing any test in `tests` (all tests when empty).
/// A unit is a distinct unit id; its power is taken from its first failure row.
/// Throws ReportError("empty denominator") when there are no units under the filter.
ErrorShare error_share(std::span<const FailureRecord> failures, const UnitTotals& totals, Technology technology,
                       std::span<const int> tests = {}, bool dso_only = false);

struct HistogramBin {
    double lower_km = 0.0;
    /// Infinity for the overflow bin.
    double upper_km = 0.0;
    std::uint64_t count = 0;
    bool overflow = false;
};

struct DistanceHistogram {
    double bin_width_km = 0.0;
    double overflow_km = 0.0;
    std::vector<HistogramBin> bins;

    std::uint64_t total() const;
};

/// Bins [k*w, (k+1)*w) up to overflow_km (the last regular bin is cut at overflow_km) plus one
/// overflow bin holding every distance >= overflow_km. Throws ReportError for w <= 0 or
/// a non-positive overflow.
DistanceHistogram distance_histogram(std::span<const double> distances_km, double bin_width_km, double overflow_km);

/// Measured boundary distances in km of units failing `test_id` (10 or 11).
std::vector<double> location_distances_km(std::span<const FailureRecord> failures, Technology technology,
                                          int test_id = 10, bool dso_only = false);

double default_overflow_km(Technology technology);

struct ReportOptions {
    double bin_width_km = 5.0;
    /// Denominators count only units with grid_operator_inspection set; pass failures filtered the same way.
    bool dso_only = false;
    std::array<double, 6> overflow_km{60.0, 60.0, 60.0, 300.0, 60.0, 60.0};
    /// Location test feeding the histograms.
    int histogram_test = 10;
};

struct TechnologySummary {
    Technology technology{Technology::Solar};
    std::uint64_t unit_count = 0;
    std::uint64_t failing_unit_count = 0;
    double failure_share = 0.0;
    double accumulated_failing_power_kw = 0.0;
    /// Distinct failing units per test id; index 0 unused.
    std::array<std::uint64_t, kTestCount + 1> failing_units_per_test{};
};

struct QualityReport {
    /// "all" or "dso_only": the unit population the summaries and histograms were computed on.
    std::string scope = "all";
    std::vector<TechnologySummary> all;
    /// Units with grid_operator_inspection set; technologies without inspected units are omitted.
    std::vector<TechnologySummary> dso_only;
    UnitTotals totals;
    std::map<Technology, DistanceHistogram> histograms;
    std::optional<SuiteTally> tally;
};

QualityReport build_report(std::span<const FailureRecord> failures, const UnitTotals& totals,
                           const ReportOptions& options = {}, const SuiteTally* tally = nullptr);

nlohmann::ordered_json summary_json(const QualityReport& report);

nlohmann::ordered_json tally_to_json(const SuiteTally& tally);
SuiteTally tally_from_json(const nlohmann::json& doc);

void write_failures_ndjson(std::ostream& out, std::span<const FailureRecord> failures);
void write_failures_csv(std::ostream& out, std::span<const FailureRecord> failures);
void write_completeness_csv(std::ostream& out, const UnitTotals& totals);
/// Wide table, one row per field and one column per technology present; "x" where a field does not exist.
void write_completeness_table(std::ostream& out, const UnitTotals& totals);
void write_histogram_csv(std::ostream& out, const DistanceHistogram& histogram);
void write_errors_by_district_csv(std::ostream& out, std::span<const FailureRecord> failures);

/// Throws ReportError naming the line on malformed input.
std::vector<FailureRecord> read_failures_ndjson(std::istream& in);

/// Output files are written into a staging directory inside `out_dir` and renamed into place by
/// commit(). Without commit() the staging directory is removed and `out_dir` is left untouched.
class StagedOutput {
public:
    explicit StagedOutput(std::filesystem::path out_dir);
    ~StagedOutput();
    StagedOutput(const StagedOutput&) = delete;
    StagedOutput& operator=(const StagedOutput&) = delete;

    /// Opens a staged file; throws ReportError when it cannot be created.
    std::ofstream& open(const std::string& name);
    /// Flushes and closes every staged file, then moves them into `out_dir`.
    void commit();

private:
    std::filesystem::path out_dir_;
    std::filesystem::path staging_;
    std::vector<std::pair<std::string, std::unique_ptr<std::ofstream>>> files_;
    bool committed_ = false;
};

struct ExportSelection {
    bool failures = true;
    bool completeness = true;
    bool totals = true;
};

/// Stages the report files; the caller commits.
void export_report(StagedOutput& out, std::span<const FailureRecord> failures, const QualityReport& report,
                   const ExportSelection& selection = {});
void export_report(const std::filesystem::path& out_dir, std::span<const FailureRecord> failures,
                   const QualityReport& report, const ExportSelection& selection = {});

} // namespace registrylint
