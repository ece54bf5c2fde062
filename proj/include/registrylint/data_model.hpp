#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace registrylint {

/// Registry table a unit belongs to. Each table gets its own slice of the test catalog.
enum class Technology : std::uint8_t { Biomass, Combustion, Hydro, Solar, Storage, Wind };

inline constexpr std::array<Technology, 6> kAllTechnologies{
    Technology::Biomass, Technology::Combustion, Technology::Hydro,
    Technology::Solar,   Technology::Storage,    Technology::Wind,
};

constexpr std::size_t index_of(Technology t) { return static_cast<std::size_t>(t); }

std::string_view to_string(Technology t);

/// Accepts the canonical lowercase names plus the plural "storages" used by the registry tables.
std::optional<Technology> parse_technology(std::string_view text);

/// Small bitset over technologies.
class TechnologySet {
public:
    constexpr TechnologySet() = default;
    constexpr TechnologySet(std::initializer_list<Technology> techs)
    {
        for (auto t : techs) {
            bits_ |= bit(t);
        }
    }

    static constexpr TechnologySet all()
    {
        TechnologySet s;
        s.bits_ = 0x3F;
        return s;
    }

    constexpr bool contains(Technology t) const { return (bits_ & bit(t)) != 0; }
    constexpr void insert(Technology t) { bits_ |= bit(t); }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr bool operator==(const TechnologySet&) const = default;

private:
    static constexpr std::uint8_t bit(Technology t) { return static_cast<std::uint8_t>(1u << index_of(t)); }
    std::uint8_t bits_ = 0;
};

using Date = std::chrono::year_month_day;

/// ISO-8601 "YYYY-MM-DD"; German "DD.MM.YYYY" is accepted as well.
std::optional<Date> parse_date(std::string_view text);
std::string format_date(const Date& d);

/// WGS84 position in degrees.
struct LatLon {
    double lat_deg{};
    double lon_deg{};

    bool operator==(const LatLon&) const = default;
};

/// One registry unit after column selection and renaming.
///
/// Technology-specific members stay empty for tables that do not carry the column.
/// Powers are kW, storage capacity kWh, lengths m, area ha.
struct UnitRecord {
    std::optional<std::string> unit_id;
    std::optional<std::string> owner_id;
    Technology technology{Technology::Solar};
    std::optional<std::string> operating_status;
    std::optional<bool> grid_operator_inspection;
    std::optional<Date> commissioning_date;
    std::optional<Date> planned_commissioning_date;
    std::optional<int> installation_year;
    std::optional<Date> download_date;
    std::optional<std::string> zip_code;
    std::optional<std::string> municipality;
    std::optional<std::string> municipality_id;
    std::optional<std::string> district;
    std::optional<std::string> district_id;
    std::optional<LatLon> coordinate;
    std::optional<std::string> unit_name;

    // solar, storage
    std::optional<double> power_gross_kw;
    std::optional<double> power_inverter_kw;
    std::optional<double> power_net_kw;

    // biomass, combustion, hydro, wind
    std::optional<double> power_kw;

    // solar
    std::optional<std::string> combination_with_storage;
    std::optional<std::int64_t> number_of_modules;
    std::optional<std::string> orientation;
    std::optional<std::string> orientation_secondary;
    std::optional<std::string> unit_type;
    std::optional<double> area_ha;

    // storage
    std::optional<double> storage_capacity_kwh;
    std::optional<std::string> battery_technology;

    // wind
    std::optional<std::string> wind_technology;
    std::optional<std::string> type_description;
    std::optional<std::string> manufacturer;
    std::optional<std::string> position;
    std::optional<double> hub_height_m;
    std::optional<double> rotor_diameter_m;

    // biomass
    std::optional<std::string> combustion_technology;
    std::optional<std::string> fuel_type;

    // combustion
    std::optional<std::string> energy_carrier;

    // hydro
    std::optional<std::string> type_of_inflow;
    std::optional<std::string> plant_type;

    bool operator==(const UnitRecord&) const = default;
};

/// Net power for solar and storage, the single power column otherwise.
/// Empty when the relevant column is null.
std::optional<double> power_of(const UnitRecord& record);

/// Canonical name of the field power_of() reads for a technology.
std::string_view power_field_name(Technology t);

/// Verdict of one catalog test on one unit.
struct RuleOutcome {
    std::string unit_id;
    int test_id = 0;
    bool passed = true;
    std::string detail;
    std::optional<double> measured;
    std::string measured_unit;

    bool operator==(const RuleOutcome&) const = default;
};

// ---------------------------------------------------------------------------
// Field catalog

enum class FieldKind : std::uint8_t { Text, Decimal, Integer, Year, Date, Flag, Coordinate };

using FieldMember = std::variant<std::optional<std::string> UnitRecord::*,
                                 std::optional<double> UnitRecord::*,
                                 std::optional<std::int64_t> UnitRecord::*,
                                 std::optional<int> UnitRecord::*,
                                 std::optional<Date> UnitRecord::*,
                                 std::optional<bool> UnitRecord::*,
                                 std::optional<LatLon> UnitRecord::*>;

struct FieldSpec {
    std::string_view name;
    FieldKind kind;
    TechnologySet technologies;
    FieldMember member;
};

/// Every canonical column, in the order used for serialization and completeness tables.
std::span<const FieldSpec> field_catalog();

/// nullptr for unknown names.
const FieldSpec* find_field(std::string_view name);

bool is_null(const UnitRecord& record, const FieldSpec& field);

/// Text form of a field value; empty string for null. Coordinates render as "lat, lon".
std::string field_to_text(const UnitRecord& record, const FieldSpec& field);

/// Schema problems of a record: populated fields that do not exist for its technology,
/// out-of-range coordinates, negative or non-finite physical quantities.
std::vector<std::string> schema_violations(const UnitRecord& record);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

} // namespace registrylint
