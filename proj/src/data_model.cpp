#include "registrylint/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace registrylint {

namespace {

using T = Technology;

constexpr TechnologySet kAll        = TechnologySet::all();
constexpr TechnologySet kSolar      = {T::Solar};
constexpr TechnologySet kStorage    = {T::Storage};
constexpr TechnologySet kPvStorage  = {T::Solar, T::Storage};
constexpr TechnologySet kSinglePower = {T::Biomass, T::Combustion, T::Hydro, T::Wind};
constexpr TechnologySet kWind       = {T::Wind};
constexpr TechnologySet kBiomass    = {T::Biomass};
constexpr TechnologySet kCombustion = {T::Combustion};
constexpr TechnologySet kHydro      = {T::Hydro};

using R = UnitRecord;

// Column set and applicability follow the registry's transformed per-technology tables.
const std::array kCatalog{
    FieldSpec{"unit_id", FieldKind::Text, kAll, &R::unit_id},
    FieldSpec{"owner_id", FieldKind::Text, kAll, &R::owner_id},
    FieldSpec{"operating_status", FieldKind::Text, kAll, &R::operating_status},
    FieldSpec{"grid_operator_inspection", FieldKind::Flag, kAll, &R::grid_operator_inspection},
    FieldSpec{"commissioning_date", FieldKind::Date, kAll, &R::commissioning_date},
    FieldSpec{"planned_commissioning_date", FieldKind::Date, kAll, &R::planned_commissioning_date},
    FieldSpec{"installation_year", FieldKind::Year, kAll, &R::installation_year},
    FieldSpec{"download_date", FieldKind::Date, kAll, &R::download_date},
    FieldSpec{"zip_code", FieldKind::Text, kAll, &R::zip_code},
    FieldSpec{"municipality", FieldKind::Text, kAll, &R::municipality},
    FieldSpec{"municipality_id", FieldKind::Text, kAll, &R::municipality_id},
    FieldSpec{"district", FieldKind::Text, kAll, &R::district},
    FieldSpec{"district_id", FieldKind::Text, kAll, &R::district_id},
    FieldSpec{"coordinate", FieldKind::Coordinate, kAll, &R::coordinate},
    FieldSpec{"unit_name", FieldKind::Text, kAll, &R::unit_name},
    FieldSpec{"power_gross_kw", FieldKind::Decimal, kPvStorage, &R::power_gross_kw},
    FieldSpec{"power_inverter_kw", FieldKind::Decimal, kPvStorage, &R::power_inverter_kw},
    FieldSpec{"power_net_kw", FieldKind::Decimal, kPvStorage, &R::power_net_kw},
    FieldSpec{"power_kw", FieldKind::Decimal, kSinglePower, &R::power_kw},
    FieldSpec{"combustion_technology", FieldKind::Text, kBiomass, &R::combustion_technology},
    FieldSpec{"fuel_type", FieldKind::Text, kBiomass, &R::fuel_type},
    FieldSpec{"energy_carrier", FieldKind::Text, kCombustion, &R::energy_carrier},
    FieldSpec{"type_of_inflow", FieldKind::Text, kHydro, &R::type_of_inflow},
    FieldSpec{"plant_type", FieldKind::Text, kHydro, &R::plant_type},
    FieldSpec{"combination_with_storage", FieldKind::Text, kSolar, &R::combination_with_storage},
    FieldSpec{"number_of_modules", FieldKind::Integer, kSolar, &R::number_of_modules},
    FieldSpec{"orientation", FieldKind::Text, kSolar, &R::orientation},
    FieldSpec{"orientation_secondary", FieldKind::Text, kSolar, &R::orientation_secondary},
    FieldSpec{"unit_type", FieldKind::Text, kSolar, &R::unit_type},
    FieldSpec{"area_ha", FieldKind::Decimal, kSolar, &R::area_ha},
    FieldSpec{"storage_capacity_kwh", FieldKind::Decimal, kStorage, &R::storage_capacity_kwh},
    FieldSpec{"battery_technology", FieldKind::Text, kStorage, &R::battery_technology},
    FieldSpec{"wind_technology", FieldKind::Text, kWind, &R::wind_technology},
    FieldSpec{"type_description", FieldKind::Text, kWind, &R::type_description},
    FieldSpec{"manufacturer", FieldKind::Text, kWind, &R::manufacturer},
    FieldSpec{"position", FieldKind::Text, kWind, &R::position},
    FieldSpec{"hub_height_m", FieldKind::Decimal, kWind, &R::hub_height_m},
    FieldSpec{"rotor_diameter_m", FieldKind::Decimal, kWind, &R::rotor_diameter_m},
};

bool parse_int(std::string_view s, int& out)
{
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

} // namespace

std::string_view to_string(Technology t)
{
    switch (t) {
    case Technology::Biomass: return "biomass";
    case Technology::Combustion: return "combustion";
    case Technology::Hydro: return "hydro";
    case Technology::Solar: return "solar";
    case Technology::Storage: return "storage";
    case Technology::Wind: return "wind";
    }
    return "unknown";
}

std::optional<Technology> parse_technology(std::string_view text)
{
    for (auto t : kAllTechnologies) {
        if (text == to_string(t)) {
            return t;
        }
    }
    if (text == "storages") {
        return Technology::Storage;
    }
    return std::nullopt;
}

std::optional<Date> parse_date(std::string_view text)
{
    int y = 0, m = 0, d = 0;
    if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
        if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m) || !parse_int(text.substr(8, 2), d)) {
            return std::nullopt;
        }
    } else if (text.size() == 10 && text[2] == '.' && text[5] == '.') {
        if (!parse_int(text.substr(6, 4), y) || !parse_int(text.substr(3, 2), m) || !parse_int(text.substr(0, 2), d)) {
            return std::nullopt;
        }
    } else {
        return std::nullopt;
    }
    Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)}, std::chrono::day{static_cast<unsigned>(d)}};
    if (!date.ok()) {
        return std::nullopt;
    }
    return date;
}

std::string format_date(const Date& d)
{
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    return buf;
}

std::optional<double> power_of(const UnitRecord& record)
{
    switch (record.technology) {
    case Technology::Solar:
    case Technology::Storage:
        return record.power_net_kw;
    default:
        return record.power_kw;
    }
}

std::string_view power_field_name(Technology t)
{
    return (t == Technology::Solar || t == Technology::Storage) ? "power_net_kw" : "power_kw";
}

std::span<const FieldSpec> field_catalog()
{
    return kCatalog;
}

const FieldSpec* find_field(std::string_view name)
{
    auto it = std::find_if(kCatalog.begin(), kCatalog.end(), [&](const FieldSpec& f) { return f.name == name; });
    return it == kCatalog.end() ? nullptr : &*it;
}

bool is_null(const UnitRecord& record, const FieldSpec& field)
{
    return std::visit([&](auto member) { return !(record.*member).has_value(); }, field.member);
}

std::string format_number(double value)
{
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

std::string field_to_text(const UnitRecord& record, const FieldSpec& field)
{
    return std::visit(
        [&](auto member) -> std::string {
            const auto& value = record.*member;
            if (!value) {
                return {};
            }
            using V = std::decay_t<decltype(*value)>;
            if constexpr (std::is_same_v<V, std::string>) {
                return *value;
            } else if constexpr (std::is_same_v<V, double>) {
                return format_number(*value);
            } else if constexpr (std::is_same_v<V, std::int64_t> || std::is_same_v<V, int>) {
                return std::to_string(*value);
            } else if constexpr (std::is_same_v<V, Date>) {
                return format_date(*value);
            } else if constexpr (std::is_same_v<V, bool>) {
                return *value ? "1" : "0";
            } else {
                return format_number(value->lat_deg) + ", " + format_number(value->lon_deg);
            }
        },
        field.member);
}

std::vector<std::string> schema_violations(const UnitRecord& record)
{
    std::vector<std::string> out;
    for (const auto& field : kCatalog) {
        if (!field.technologies.contains(record.technology) && !is_null(record, field)) {
            out.push_back(std::string(field.name) + " does not exist for " + std::string(to_string(record.technology)));
        }
    }
    if (record.coordinate) {
        const auto& c = *record.coordinate;
        if (!(c.lat_deg >= -90.0 && c.lat_deg <= 90.0) || !(c.lon_deg >= -180.0 && c.lon_deg <= 180.0)) {
            out.emplace_back("coordinate out of range");
        }
    }
    const std::optional<double> UnitRecord::*quantities[] = {
        &R::power_gross_kw, &R::power_inverter_kw, &R::power_net_kw, &R::power_kw,
        &R::area_ha,        &R::storage_capacity_kwh, &R::hub_height_m, &R::rotor_diameter_m,
    };
    for (auto member : quantities) {
        const auto& v = record.*member;
        if (v && !(std::isfinite(*v) && *v >= 0.0)) {
            out.emplace_back("negative or non-finite quantity");
        }
    }
    return out;
}

} // namespace registrylint
