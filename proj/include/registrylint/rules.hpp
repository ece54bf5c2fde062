#pragma once

#include "registrylint/data_model.hpp"
#include "registrylint/geo.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <regex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace registrylint {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kFirstTest = 1;
inline constexpr int kLastTest = 15;
inline constexpr int kTestCount = 15;

/// Check-mark matrix of the test catalog: which test applies to which registry table.
bool test_applies(int test_id, Technology technology);

/// Every (test, technology) pair with a check-mark, ordered by test then technology.
std::vector<std::pair<int, Technology>> test_matrix();

/// Number of check-marks in the matrix; each one is a separately tallied data unit test.
std::size_t check_mark_count();

/// Short human description of a test id.
std::string_view test_description(int test_id);

/// Closed interval [lo, hi].
struct Range {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double v) const { return v >= lo && v <= hi; }
};

struct YearRange {
    int min = 0;
    int max = 0;
};

/// Anchored regular expression used by the identifier format test.
class IdPattern {
public:
    explicit IdPattern(std::string source);

    const std::string& source() const { return source_; }
    bool matches(const std::string& value) const;

private:
    std::string source_;
    std::regex regex_;
};

struct RuleConfig {
    std::array<std::vector<std::string>, 6> required_fields;

    IdPattern unit_id_pattern{"[A-Z]{3}[0-9]{12}"};
    IdPattern municipality_id_pattern{"[0-9]{8}"};
    IdPattern zip_pattern{"[0-9]{5}"};

    Range module_power_w{50.0, 700.0};
    double inverter_ratio_factor = 20.0;
    Range area_density_mw_per_ha{0.05, 1.5};
    Range rotor_specific_power_w_per_m2{160.0, 700.0};
    double buffer_m = 1500.0;

    /// Upper bound inclusive; the lower bound is exclusive (power must be positive).
    std::array<Range, 6> power_range_mw{};
    std::array<YearRange, 6> year_range{};

    double balcony_limit_kw = 1.0;
    double balcony_tolerance_kw = 0.2;
    double balcony_name_limit_kw = 5.0;
    std::vector<std::string> balcony_keywords{"balkon", "balcony"};
    /// Registry unit-type values that denote plug-in balcony PV.
    std::vector<std::string> balcony_unit_types{"Balkonkraftwerk", "Steckerfertige Erzeugungsanlage"};
    std::vector<std::string> ground_mounted_unit_types{"Freifläche", "Freiflaeche"};

    RuleConfig();

    const Range& power_range(Technology t) const { return power_range_mw[index_of(t)]; }
    const YearRange& years(Technology t) const { return year_range[index_of(t)]; }

    /// Throws ConfigError on inverted ranges, factors <= 1, negative buffer or unknown required fields.
    void validate() const;
};

/// Canonical fields read by the tests enabled for a technology ("power" resolves to power_of's field).
std::vector<std::string> fields_used_by_tests(Technology technology, const RuleConfig& config);

bool is_balcony_unit_type(const std::string& unit_type, const RuleConfig& config);
bool is_ground_mounted(const std::string& unit_type, const RuleConfig& config);

// ---------------------------------------------------------------------------
// Per-record tests. Nulls in optional inputs give a vacuous pass; test 1 owns nulls.

RuleOutcome check_required_fields(const UnitRecord& record, const RuleConfig& config);                // 1
std::array<RuleOutcome, 2> check_power_ordering(const UnitRecord& record);                            // 3, 4
RuleOutcome check_id_formats(const UnitRecord& record, const RuleConfig& config);                     // 5
RuleOutcome check_module_power(const UnitRecord& record, const RuleConfig& config);                   // 6
RuleOutcome check_inverter_ratio(const UnitRecord& record, const RuleConfig& config);                 // 7
RuleOutcome check_area_density(const UnitRecord& record, const RuleConfig& config);                   // 8
RuleOutcome check_rotor_power(const UnitRecord& record, const RuleConfig& config);                    // 9
RuleOutcome check_power_range(const UnitRecord& record, const RuleConfig& config);                    // 12
RuleOutcome check_installation_year(const UnitRecord& record, const RuleConfig& config);              // 13
RuleOutcome check_hub_height(const UnitRecord& record);                                               // 14
RuleOutcome check_balcony_power(const UnitRecord& record, const RuleConfig& config);                  // 15

/// Tests 10 and 11. Either index may be null, in which case that level passes without evaluation.
std::array<RuleOutcome, 2> check_location(const UnitRecord& record, const geo::SpatialIndex* districts,
                                          const geo::SpatialIndex* municipalities, const RuleConfig& config);

/// Test 2 over a whole table: one failed outcome per record in a duplicate group, indexed like `records`.
std::vector<std::pair<std::size_t, RuleOutcome>> check_unique_ids(std::span<const UnitRecord> records);

// ---------------------------------------------------------------------------
// Suite

struct EvaluationContext {
    const RuleConfig& config;
    const geo::SpatialIndex* districts = nullptr;
    const geo::SpatialIndex* municipalities = nullptr;
};

/// One unit that failed at least one test.
struct FailureRecord {
    std::string unit_id;
    Technology technology{Technology::Solar};
    std::optional<double> power_kw;
    std::optional<std::string> district_id;
    std::optional<std::string> municipality_id;
    bool grid_operator_inspection = false;
    /// Failed outcomes only, ascending by test id.
    std::vector<RuleOutcome> outcomes;

    std::vector<int> test_ids() const;
    const RuleOutcome* outcome(int test_id) const;

    bool operator==(const FailureRecord&) const = default;
};

/// Evaluated and failed counts per (test, technology).
struct SuiteTally {
    std::array<std::array<std::uint64_t, 6>, kTestCount + 1> evaluated{};
    std::array<std::array<std::uint64_t, 6>, kTestCount + 1> failed{};

    void merge(const SuiteTally& other);
    std::uint64_t evaluated_total(int test_id) const;
    std::uint64_t failed_total(int test_id) const;
    /// (test, technology) pairs with at least one evaluation.
    std::vector<std::pair<int, Technology>> exercised_pairs() const;
};

struct SuiteResult {
    /// Sorted by unit_id, then technology, then input order.
    std::vector<FailureRecord> failures;
    SuiteTally tally;
    std::uint64_t records = 0;
};

/// Evaluates the single test `test_id` on a record; empty when the test is not check-marked for the
/// record's technology or is the table-level uniqueness test.
std::optional<RuleOutcome> evaluate_test(int test_id, const UnitRecord& record, const EvaluationContext& ctx);

/// Incremental suite runner. Records are consumed in chunks so large tables never need to be
/// materialized at once; per-record tests are spread over `jobs` worker threads.
class SuiteRunner {
public:
    SuiteRunner(EvaluationContext ctx, unsigned jobs = 1);
    ~SuiteRunner();
    SuiteRunner(const SuiteRunner&) = delete;
    SuiteRunner& operator=(const SuiteRunner&) = delete;

    void consume(std::span<const UnitRecord> chunk);

    /// Adds the uniqueness failures and returns the sorted result. The runner is spent afterwards.
    SuiteResult finish();

private:
    struct State;
    std::unique_ptr<State> state_;
};

SuiteResult run_suite(std::span<const UnitRecord> records, const EvaluationContext& ctx, unsigned jobs = 1);

} // namespace registrylint
