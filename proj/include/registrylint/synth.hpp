#pragma once

#include "registrylint/data_model.hpp"
#include "registrylint/geo.hpp"
#include "registrylint/rules.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace registrylint::synth {

class SynthError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rectangular grid of districts, each split into rows x cols municipalities.
/// Cells are axis-aligned in latitude / longitude.
struct GridSpec {
    double origin_lat = 50.0;
    double origin_lon = 7.0;
    int district_rows = 6;
    int district_cols = 5;
    int municipality_rows = 4;
    int municipality_cols = 4;
    double municipality_lat_deg = 0.1;
    double municipality_lon_deg = 0.15;
};

struct GridCell {
    std::string municipality_id;
    std::string municipality;
    std::string district_id;
    std::string district;
    std::string zip_code;
    geo::BoundingBox box;
    /// Which sides of the cell lie on its district's boundary.
    bool north_on_district = false;
    bool south_on_district = false;
    bool east_on_district = false;
    bool west_on_district = false;
};

class SyntheticGrid {
public:
    /// Throws SynthError for non-positive dimensions or sizes.
    explicit SyntheticGrid(GridSpec spec = {});

    const GridSpec& spec() const { return spec_; }
    const std::vector<GridCell>& cells() const { return cells_; }
    const GridCell* cell(std::string_view municipality_id) const;
    const geo::BoundarySet& districts() const { return districts_; }
    const geo::BoundarySet& municipalities() const { return municipalities_; }
    std::size_t region_count() const { return districts_.size() + municipalities_.size(); }

private:
    GridSpec spec_;
    std::vector<GridCell> cells_;
    std::map<std::string, std::size_t, std::less<>> by_id_;
    geo::BoundarySet districts_;
    geo::BoundarySet municipalities_;
};

/// Distance kept between generated coordinates and every municipality edge.
inline constexpr double kPlacementMarginM = 2000.0;

/// `n` records of one technology that pass every test with the default rule configuration.
/// Deterministic per (technology, n, seed, grid).
std::vector<UnitRecord> generate_clean(Technology technology, std::size_t n, std::uint64_t seed,
                                       const SyntheticGrid& grid);

enum class ErrorClass : std::uint8_t {
    MagnitudeMixup,
    PlaceholderModules,
    CoordinateDisplacement,
    NullRequiredField,
    DuplicateId,
    ImplausibleYear,
    BalconyOverpower,
    HubRotorSwap,
    PowerOutOfRange,
    ZipMalformed,
};

inline constexpr std::size_t kErrorClassCount = 10;

inline constexpr std::array<ErrorClass, kErrorClassCount> kAllErrorClasses{
    ErrorClass::MagnitudeMixup,    ErrorClass::PlaceholderModules, ErrorClass::CoordinateDisplacement,
    ErrorClass::NullRequiredField, ErrorClass::DuplicateId,        ErrorClass::ImplausibleYear,
    ErrorClass::BalconyOverpower,  ErrorClass::HubRotorSwap,       ErrorClass::PowerOutOfRange,
    ErrorClass::ZipMalformed,
};

std::string_view to_string(ErrorClass c);
std::optional<ErrorClass> parse_error_class(std::string_view text);
bool error_class_applies(ErrorClass c, Technology technology);

struct ErrorInjectionSpec {
    /// Per-class probability that a record receives the error; the realised count is binomial.
    std::array<double, kErrorClassCount> probability{};
    /// Exact per-class count; overrides the probability when set.
    std::array<std::optional<std::size_t>, kErrorClassCount> count{};
    double displacement_km = 5.0;

    /// Spreads `rate` evenly over the classes that apply to `technology`.
    static ErrorInjectionSpec uniform_rate(double rate, Technology technology);

    /// Throws SynthError for probabilities outside [0, 1] or a displacement not above the buffer.
    void validate(double buffer_m) const;
};

struct InjectedError {
    std::size_t row = 0;
    std::string unit_id;
    ErrorClass error{ErrorClass::MagnitudeMixup};
    /// Tests that must fail for this row, ascending.
    std::vector<int> expected_tests;

    bool operator==(const InjectedError&) const = default;
};

struct GroundTruth {
    Technology technology{Technology::Solar};
    std::size_t records = 0;
    /// Ascending by row.
    std::vector<InjectedError> injected;

    /// Union of expected tests per unit id.
    std::map<std::string, std::set<int>> expected_by_unit() const;

    nlohmann::ordered_json to_json() const;
    static GroundTruth from_json(const nlohmann::json& doc);

    bool operator==(const GroundTruth&) const = default;
};

struct InjectionResult {
    std::vector<UnitRecord> records;
    GroundTruth truth;
};

/// Modifies distinct records of a clean table. Each injected row gets the exact set of tests the
/// modification violates, computed from the thresholds in `config`; injections that would pass
/// every test or land on a threshold are redrawn on another record. Coordinate displacement needs
/// `grid`. Throws SynthError when the table has too few eligible records.
InjectionResult inject_errors(std::vector<UnitRecord> records, const ErrorInjectionSpec& spec, std::uint64_t seed,
                              const RuleConfig& config, const SyntheticGrid* grid);

} // namespace registrylint::synth
