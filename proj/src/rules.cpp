#include "registrylint/rules.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <thread>
#include <unordered_map>

namespace registrylint {

namespace {

using T = Technology;

constexpr TechnologySet kAll = TechnologySet::all();

// Row i lists the tables test i is applied to.
constexpr std::array<TechnologySet, kTestCount + 1> kMatrix{{
    {},
    kAll,                    // 1  null values
    kAll,                    // 2  unique ids
    {T::Solar, T::Storage},  // 3  gross >= net
    {T::Solar, T::Storage},  // 4  inverter >= net
    kAll,                    // 5  id formats
    {T::Solar},              // 6  gross / modules
    {T::Solar, T::Storage},  // 7  gross / inverter
    {T::Solar},              // 8  gross / area, ground-mounted
    {T::Wind},               // 9  power vs rotor diameter
    kAll,                    // 10 coordinates in district
    kAll,                    // 11 coordinates in municipality
    kAll,                    // 12 power range
    kAll,                    // 13 installation year
    {T::Wind},               // 14 hub height vs rotor radius
    {T::Solar},              // 15 balcony capacity
}};

std::string lower_ascii(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool contains_ci(const std::string& haystack, const std::string& needle)
{
    return lower_ascii(haystack).find(lower_ascii(needle)) != std::string::npos;
}

RuleOutcome make_outcome(const UnitRecord& record, int test_id)
{
    RuleOutcome o;
    o.unit_id = record.unit_id.value_or("");
    o.test_id = test_id;
    return o;
}

void fail(RuleOutcome& o, std::string detail)
{
    o.passed = false;
    o.detail = std::move(detail);
}

std::string num(double v)
{
    return format_number(v);
}

} // namespace

bool test_applies(int test_id, Technology technology)
{
    if (test_id < kFirstTest || test_id > kLastTest) {
        return false;
    }
    return kMatrix[static_cast<std::size_t>(test_id)].contains(technology);
}

std::vector<std::pair<int, Technology>> test_matrix()
{
    std::vector<std::pair<int, Technology>> out;
    for (int k = kFirstTest; k <= kLastTest; ++k) {
        for (auto t : kAllTechnologies) {
            if (test_applies(k, t)) {
                out.emplace_back(k, t);
            }
        }
    }
    return out;
}

std::size_t check_mark_count()
{
    return test_matrix().size();
}

std::string_view test_description(int test_id)
{
    switch (test_id) {
    case 1: return "required fields are not null";
    case 2: return "unit ids are unique";
    case 3: return "gross power >= net power";
    case 4: return "inverter power >= net power";
    case 5: return "unit id, municipality id and zip code match their formats";
    case 6: return "gross power per module in accepted range";
    case 7: return "gross and inverter power differ by less than the accepted factor";
    case 8: return "gross power per area in accepted range (ground-mounted PV)";
    case 9: return "rated power matches rotor diameter";
    case 10: return "coordinates lie in the district";
    case 11: return "coordinates lie in the municipality";
    case 12: return "installed power in accepted range";
    case 13: return "installation year in accepted range";
    case 14: return "hub height not below rotor radius";
    case 15: return "balcony PV has small installed capacity";
    default: return "unknown test";
    }
}

IdPattern::IdPattern(std::string source)
: source_(std::move(source))
{
    try {
        regex_ = std::regex(source_, std::regex::ECMAScript | std::regex::optimize);
    } catch (const std::regex_error& e) {
        throw ConfigError("invalid pattern '" + source_ + "': " + e.what());
    }
}

bool IdPattern::matches(const std::string& value) const
{
    return std::regex_match(value, regex_);
}

RuleConfig::RuleConfig()
{
    for (auto& fields : required_fields) {
        fields = {"unit_id", "municipality_id", "operating_status", "power"};
    }
    power_range_mw[index_of(T::Biomass)] = {0.0, 150.0};
    power_range_mw[index_of(T::Combustion)] = {0.0, 2000.0};
    power_range_mw[index_of(T::Hydro)] = {0.0, 1500.0};
    power_range_mw[index_of(T::Solar)] = {0.0, 500.0};
    power_range_mw[index_of(T::Storage)] = {0.0, 800.0};
    power_range_mw[index_of(T::Wind)] = {0.0, 22.0};

    year_range[index_of(T::Biomass)] = {1900, 2030};
    year_range[index_of(T::Combustion)] = {1900, 2030};
    year_range[index_of(T::Hydro)] = {1900, 2030};
    year_range[index_of(T::Solar)] = {1980, 2030};
    year_range[index_of(T::Storage)] = {1980, 2030};
    year_range[index_of(T::Wind)] = {1980, 2030};
}

void RuleConfig::validate() const
{
    auto check_range = [](const Range& r, const std::string& name) {
        if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || !(r.lo < r.hi)) {
            throw ConfigError(name + ": lower bound must be below upper bound");
        }
    };
    check_range(module_power_w, "module_power_range_w");
    check_range(area_density_mw_per_ha, "area_density_range_mw_per_ha");
    check_range(rotor_specific_power_w_per_m2, "rotor_specific_power_range_w_per_m2");
    if (!(inverter_ratio_factor > 1.0)) {
        throw ConfigError("inverter_ratio_factor must be greater than 1");
    }
    if (!(buffer_m >= 0.0) || !std::isfinite(buffer_m)) {
        throw ConfigError("buffer_m must be non-negative");
    }
    if (!(balcony_limit_kw > 0.0) || !(balcony_tolerance_kw >= 0.0) || !(balcony_name_limit_kw > 0.0)) {
        throw ConfigError("balcony limits must be positive");
    }
    for (auto t : kAllTechnologies) {
        const auto tech = std::string(to_string(t));
        check_range(power_range(t), "power_range_mw." + tech);
        if (power_range(t).lo < 0.0) {
            throw ConfigError("power_range_mw." + tech + ": lower bound must be >= 0");
        }
        if (!(years(t).min < years(t).max)) {
            throw ConfigError("year_range." + tech + ": min must be below max");
        }
        for (const auto& f : required_fields[index_of(t)]) {
            if (f == "power") {
                continue;
            }
            const auto* spec = find_field(f);
            if (spec == nullptr || !spec->technologies.contains(t)) {
                throw ConfigError("required_fields." + tech + ": unknown field '" + f + "'");
            }
        }
    }
}

std::vector<std::string> fields_used_by_tests(Technology technology, const RuleConfig& config)
{
    std::vector<std::string> out;
    auto add = [&](std::string_view f) {
        if (std::find(out.begin(), out.end(), f) == out.end()) {
            out.emplace_back(f);
        }
    };
    for (const auto& f : config.required_fields[index_of(technology)]) {
        add(f == "power" ? power_field_name(technology) : std::string_view(f));
    }
    const auto uses = [&](int k) { return test_applies(k, technology); };
    if (uses(3)) {
        add("power_gross_kw");
        add("power_inverter_kw");
        add("power_net_kw");
    }
    if (uses(5)) {
        add("unit_id");
        add("municipality_id");
        add("zip_code");
    }
    if (uses(6)) {
        add("number_of_modules");
    }
    if (uses(8)) {
        add("area_ha");
        add("unit_type");
    }
    if (uses(9)) {
        add("rotor_diameter_m");
    }
    if (uses(10)) {
        add("coordinate");
    }
    add(power_field_name(technology));
    add("installation_year");
    if (uses(14)) {
        add("hub_height_m");
    }
    if (uses(15)) {
        add("unit_name");
    }
    return out;
}

bool is_balcony_unit_type(const std::string& unit_type, const RuleConfig& config)
{
    for (const auto& t : config.balcony_unit_types) {
        if (contains_ci(unit_type, t)) {
            return true;
        }
    }
    for (const auto& k : config.balcony_keywords) {
        if (contains_ci(unit_type, k)) {
            return true;
        }
    }
    return false;
}

bool is_ground_mounted(const std::string& unit_type, const RuleConfig& config)
{
    return std::find(config.ground_mounted_unit_types.begin(), config.ground_mounted_unit_types.end(), unit_type) !=
           config.ground_mounted_unit_types.end();
}

// ---------------------------------------------------------------------------

RuleOutcome check_required_fields(const UnitRecord& record, const RuleConfig& config)
{
    auto o = make_outcome(record, 1);
    std::string missing;
    for (const auto& name : config.required_fields[index_of(record.technology)]) {
        bool null = false;
        if (name == "power") {
            null = !power_of(record).has_value();
        } else if (const auto* f = find_field(name)) {
            null = is_null(record, *f);
        }
        if (null) {
            if (!missing.empty()) {
                missing += ", ";
            }
            missing += name;
        }
    }
    if (!missing.empty()) {
        fail(o, missing);
    }
    return o;
}

std::array<RuleOutcome, 2> check_power_ordering(const UnitRecord& record)
{
    auto gross = make_outcome(record, 3);
    auto inverter = make_outcome(record, 4);
    if (record.power_net_kw) {
        const double net = *record.power_net_kw;
        if (record.power_gross_kw) {
            gross.measured = *record.power_gross_kw;
            gross.measured_unit = "kW";
            if (*record.power_gross_kw < net) {
                fail(gross, "power_gross_kw " + num(*record.power_gross_kw) + " < power_net_kw " + num(net));
            }
        }
        if (record.power_inverter_kw) {
            inverter.measured = *record.power_inverter_kw;
            inverter.measured_unit = "kW";
            if (*record.power_inverter_kw < net) {
                fail(inverter, "power_inverter_kw " + num(*record.power_inverter_kw) + " < power_net_kw " + num(net));
            }
        }
    }
    return {std::move(gross), std::move(inverter)};
}

RuleOutcome check_id_formats(const UnitRecord& record, const RuleConfig& config)
{
    auto o = make_outcome(record, 5);
    std::string bad;
    auto check = [&](const std::optional<std::string>& value, const IdPattern& pattern, std::string_view name) {
        if (value && !pattern.matches(*value)) {
            if (!bad.empty()) {
                bad += ", ";
            }
            bad += name;
        }
    };
    check(record.unit_id, config.unit_id_pattern, "unit_id");
    check(record.municipality_id, config.municipality_id_pattern, "municipality_id");
    check(record.zip_code, config.zip_pattern, "zip_code");
    if (!bad.empty()) {
        fail(o, bad);
    }
    return o;
}

RuleOutcome check_module_power(const UnitRecord& record, const RuleConfig& config)
{
    auto o = make_outcome(record, 6);
    if (!record.power_gross_kw || !record.number_of_modules) {
        return o;
    }
    if (*record.number_of_modules <= 0) {
        fail(o, "zero modules");
        return o;
    }
    const double w_per_module = *record.power_gross_kw * 1000.0 / static_cast<double>(*record.number_of_modules);
    o.measured = w_per_module;
    o.measured_unit = "W/module";
    if (!config.module_power_w.contains(w_per_module)) {
        fail(o, num(w_per_module) + " W per module outside [" + num(config.module_power_w.lo) + ", " +
                    num(config.module_power_w.hi) + "]");
    }
    return o;
}

RuleOutcome check_inverter_ratio(const UnitRecord& record, const RuleConfig& config)
{
    auto o = make_outcome(record, 7);
    if (!record.power_gross_kw || !record.power_inverter_kw) {
        return o;
    }
    const double gross = *record.power_gross_kw;
    const double inverter = *record.power_inverter_kw;
    if (!(gross > 0.0) || !(inverter > 0.0)) {
        fail(o, "zero power");
        return o;
    }
    const double ratio = std::max(gross / inverter, inverter / gross);
    o.measured = ratio;
    o.measured_unit = "ratio";
    if (ratio >= config.inverter_ratio_factor) {
        fail(o, "gross and inverter power differ by factor " + num(ratio));
    }
    return o;
}

RuleOutcome check_area_density(const UnitRecord& record, const RuleConfig& config)
{
    auto o = make_outcome(record, 8);
    if (!record.unit_type || !is_ground_mounted(*record.unit_type, config) || !record.power_gross_kw || !record.area_ha) {
        return o;
    }
    if (!(*record.area_ha > 0.0)) {
        fail(o, "non-positive area");
        return o;
    }
    const double density = *record.power_gross_kw / 1000.0 / *record.area_ha;
    o.measured = density;
    o.measured_unit = "MW/ha";
    if (!config.area_density_mw_per_ha.contains(density)) {
        fail(o, num(density) + " MW/ha outside [" + num(config.area_density_mw_per_ha.lo) + ", " +
                    num(config.area_density_mw_per_ha.hi) + "]");
    }
    return o;
}

RuleOutcome check_rotor_power(const UnitRecord& record, const RuleConfig& config)
{
    auto o = make_outcome(record, 9);
    const auto power = power_of(record);
    if (!power || !record.rotor_diameter_m) {
        return o;
    }
    const double d = *record.rotor_diameter_m;
    if (!(d > 0.0)) {
        fail(o, "non-positive rotor diameter");
        return o;
    }
    const double swept_area = std::numbers::pi * (d / 2.0) * (d / 2.0);
    const double specific = *power * 1000.0 / swept_area;
    o.measured = specific;
    o.measured_unit = "W/m2";
    if (!config.rotor_specific_power_w_per_m2.contains(specific)) {
        fail(o, num(specific) + " W/m2 outside [" + num(config.rotor_specific_power_w_per_m2.lo) + ", " +
                    num(config.rotor_specific_power_w_per_m2.hi) + "]");
    }
    return o;
}

namespace {

RuleOutcome location_outcome(const UnitRecord& record, int test_id, const std::optional<std::string>& region_id,
                             const geo::SpatialIndex* index, const RuleConfig& config)
{
    auto o = make_outcome(record, test_id);
    if (index == nullptr || !record.coordinate || !region_id) {
        return o;
    }
    const auto level = std::string(geo::to_string(index->boundaries().level()));
    const auto* region = index->boundaries().find(*region_id);
    if (region == nullptr) {
        fail(o, "unknown region key " + *region_id);
        return o;
    }
    if (!geo::contains_with_buffer(*record.coordinate, *region, config.buffer_m)) {
        o.measured = geo::distance_to_boundary(*record.coordinate, *region);
        o.measured_unit = "m";
        fail(o, "coordinate outside " + level + " " + *region_id);
    }
    return o;
}

} // namespace

std::array<RuleOutcome, 2> check_location(const UnitRecord& record, const geo::SpatialIndex* districts,
                                          const geo::SpatialIndex* municipalities, const RuleConfig& config)
{
    return {location_outcome(record, 10, record.district_id, districts, config),
            location_outcome(record, 11, record.municipality_id, municipalities, config)};
}

RuleOutcome check_power_range(const UnitRecord& record, const RuleConfig& config)
{
    auto o = make_outcome(record, 12);
    const auto power = power_of(record);
    if (!power) {
        return o;
    }
    const double mw = *power / 1000.0;
    const auto& range = config.power_range(record.technology);
    o.measured = mw;
    o.measured_unit = "MW";
    if (!(mw > range.lo && mw <= range.hi)) {
        fail(o, num(mw) + " MW outside (" + num(range.lo) + ", " + num(range.hi) + "]");
    }
    return o;
}

RuleOutcome check_installation_year(const UnitRecord& record, const RuleConfig& config)
{
    auto o = make_outcome(record, 13);
    if (!record.installation_year) {
        return o;
    }
    const int year = *record.installation_year;
    const auto& range = config.years(record.technology);
    o.measured = year;
    o.measured_unit = "year";
    if (year < range.min || year > range.max) {
        fail(o, "installation year " + std::to_string(year) + " outside [" + std::to_string(range.min) + ", " +
                    std::to_string(range.max) + "]");
    }
    return o;
}

RuleOutcome check_hub_height(const UnitRecord& record)
{
    auto o = make_outcome(record, 14);
    if (!record.hub_height_m || !record.rotor_diameter_m) {
        return o;
    }
    const double radius = *record.rotor_diameter_m / 2.0;
    o.measured = *record.hub_height_m;
    o.measured_unit = "m";
    if (*record.hub_height_m < radius) {
        fail(o, "hub height " + num(*record.hub_height_m) + " m below rotor radius " + num(radius) + " m");
    }
    return o;
}

RuleOutcome check_balcony_power(const UnitRecord& record, const RuleConfig& config)
{
    auto o = make_outcome(record, 15);
    if (!record.power_net_kw) {
        return o;
    }
    const double net = *record.power_net_kw;
    o.measured = net;
    o.measured_unit = "kW";
    std::string why;
    if (record.unit_type && is_balcony_unit_type(*record.unit_type, config) &&
        net > config.balcony_limit_kw + config.balcony_tolerance_kw) {
        why = "balcony unit type with net power " + num(net) + " kW above " +
              num(config.balcony_limit_kw + config.balcony_tolerance_kw) + " kW";
    }
    if (record.unit_name && net > config.balcony_name_limit_kw) {
        for (const auto& keyword : config.balcony_keywords) {
            if (contains_ci(*record.unit_name, keyword)) {
                if (!why.empty()) {
                    why += "; ";
                }
                why += "balcony name with net power " + num(net) + " kW above " + num(config.balcony_name_limit_kw) + " kW";
                break;
            }
        }
    }
    if (!why.empty()) {
        fail(o, why);
    }
    return o;
}

std::vector<std::pair<std::size_t, RuleOutcome>> check_unique_ids(std::span<const UnitRecord> records)
{
    std::unordered_map<std::string_view, std::vector<std::size_t>> groups;
    groups.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].unit_id) {
            groups[*records[i].unit_id].push_back(i);
        }
    }
    std::vector<std::pair<std::size_t, RuleOutcome>> out;
    for (const auto& [id, members] : groups) {
        if (members.size() < 2) {
            continue;
        }
        for (auto i : members) {
            auto o = make_outcome(records[i], 2);
            o.measured = static_cast<double>(members.size());
            o.measured_unit = "occurrences";
            fail(o, "duplicate unit_id");
            out.emplace_back(i, std::move(o));
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

// ---------------------------------------------------------------------------

std::vector<int> FailureRecord::test_ids() const
{
    std::vector<int> ids;
    ids.reserve(outcomes.size());
    for (const auto& o : outcomes) {
        ids.push_back(o.test_id);
    }
    return ids;
}

const RuleOutcome* FailureRecord::outcome(int test_id) const
{
    for (const auto& o : outcomes) {
        if (o.test_id == test_id) {
            return &o;
        }
    }
    return nullptr;
}

void SuiteTally::merge(const SuiteTally& other)
{
    for (std::size_t k = 0; k < evaluated.size(); ++k) {
        for (std::size_t t = 0; t < 6; ++t) {
            evaluated[k][t] += other.evaluated[k][t];
            failed[k][t] += other.failed[k][t];
        }
    }
}

std::uint64_t SuiteTally::evaluated_total(int test_id) const
{
    std::uint64_t n = 0;
    for (auto v : evaluated.at(static_cast<std::size_t>(test_id))) {
        n += v;
    }
    return n;
}

std::uint64_t SuiteTally::failed_total(int test_id) const
{
    std::uint64_t n = 0;
    for (auto v : failed.at(static_cast<std::size_t>(test_id))) {
        n += v;
    }
    return n;
}

std::vector<std::pair<int, Technology>> SuiteTally::exercised_pairs() const
{
    std::vector<std::pair<int, Technology>> out;
    for (int k = 0; k <= kLastTest; ++k) {
        for (auto t : kAllTechnologies) {
            if (evaluated[static_cast<std::size_t>(k)][index_of(t)] > 0) {
                out.emplace_back(k, t);
            }
        }
    }
    return out;
}

std::optional<RuleOutcome> evaluate_test(int test_id, const UnitRecord& record, const EvaluationContext& ctx)
{
    if (!test_applies(test_id, record.technology) || test_id == 2) {
        return std::nullopt;
    }
    const auto& cfg = ctx.config;
    switch (test_id) {
    case 1: return check_required_fields(record, cfg);
    case 3: return check_power_ordering(record)[0];
    case 4: return check_power_ordering(record)[1];
    case 5: return check_id_formats(record, cfg);
    case 6: return check_module_power(record, cfg);
    case 7: return check_inverter_ratio(record, cfg);
    case 8: return check_area_density(record, cfg);
    case 9: return check_rotor_power(record, cfg);
    case 10:
        if (ctx.districts == nullptr) {
            return std::nullopt;
        }
        return check_location(record, ctx.districts, nullptr, cfg)[0];
    case 11:
        if (ctx.municipalities == nullptr) {
            return std::nullopt;
        }
        return check_location(record, nullptr, ctx.municipalities, cfg)[1];
    case 12: return check_power_range(record, cfg);
    case 13: return check_installation_year(record, cfg);
    case 14: return check_hub_height(record);
    case 15: return check_balcony_power(record, cfg);
    default: return std::nullopt;
    }
}

namespace {

struct Pending {
    FailureRecord record;
    std::uint64_t sequence = 0;
};

FailureRecord skeleton(const UnitRecord& r)
{
    FailureRecord f;
    f.unit_id = r.unit_id.value_or("");
    f.technology = r.technology;
    f.power_kw = power_of(r);
    f.district_id = r.district_id;
    f.municipality_id = r.municipality_id;
    f.grid_operator_inspection = r.grid_operator_inspection.value_or(false);
    return f;
}

/// Runs every check-marked per-record test; appends failures and counts evaluations.
void evaluate_record(const UnitRecord& record, const EvaluationContext& ctx, std::vector<RuleOutcome>& failed,
                     SuiteTally& tally)
{
    const auto tech = record.technology;
    const auto ti = index_of(tech);
    auto note = [&](RuleOutcome&& o) {
        ++tally.evaluated[static_cast<std::size_t>(o.test_id)][ti];
        if (!o.passed) {
            ++tally.failed[static_cast<std::size_t>(o.test_id)][ti];
            failed.push_back(std::move(o));
        }
    };
    const auto& cfg = ctx.config;
    if (test_applies(1, tech)) {
        note(check_required_fields(record, cfg));
    }
    if (test_applies(3, tech)) {
        auto ordering = check_power_ordering(record);
        note(std::move(ordering[0]));
        note(std::move(ordering[1]));
    }
    if (test_applies(5, tech)) {
        note(check_id_formats(record, cfg));
    }
    if (test_applies(6, tech)) {
        note(check_module_power(record, cfg));
    }
    if (test_applies(7, tech)) {
        note(check_inverter_ratio(record, cfg));
    }
    if (test_applies(8, tech)) {
        note(check_area_density(record, cfg));
    }
    if (test_applies(9, tech)) {
        note(check_rotor_power(record, cfg));
    }
    if (test_applies(10, tech) && (ctx.districts != nullptr || ctx.municipalities != nullptr)) {
        auto loc = check_location(record, ctx.districts, ctx.municipalities, cfg);
        if (ctx.districts != nullptr) {
            note(std::move(loc[0]));
        }
        if (ctx.municipalities != nullptr) {
            note(std::move(loc[1]));
        }
    }
    if (test_applies(12, tech)) {
        note(check_power_range(record, cfg));
    }
    if (test_applies(13, tech)) {
        note(check_installation_year(record, cfg));
    }
    if (test_applies(14, tech)) {
        note(check_hub_height(record));
    }
    if (test_applies(15, tech)) {
        note(check_balcony_power(record, cfg));
    }
}

struct IdSlot {
    std::uint32_t count = 0;
    Pending first;
    std::vector<Pending> others;
};

} // namespace

struct SuiteRunner::State {
    EvaluationContext ctx;
    unsigned jobs;
    std::uint64_t sequence = 0;
    std::vector<Pending> failures;
    SuiteTally tally;
    std::array<std::unordered_map<std::string, IdSlot>, 6> ids;

    struct Partition {
        std::vector<Pending> failures;
        SuiteTally tally;
    };

    void evaluate(std::span<const UnitRecord> records, std::uint64_t first_sequence, Partition& out) const
    {
        std::vector<RuleOutcome> failed;
        for (std::size_t i = 0; i < records.size(); ++i) {
            failed.clear();
            evaluate_record(records[i], ctx, failed, out.tally);
            if (!failed.empty()) {
                Pending p{skeleton(records[i]), first_sequence + i};
                p.record.outcomes = std::move(failed);
                out.failures.push_back(std::move(p));
                failed = {};
            }
        }
    }
};

SuiteRunner::SuiteRunner(EvaluationContext ctx, unsigned jobs)
: state_(std::make_unique<State>(State{ctx, std::max(1u, jobs), 0, {}, {}, {}}))
{
}

SuiteRunner::~SuiteRunner() = default;

void SuiteRunner::consume(std::span<const UnitRecord> chunk)
{
    auto& s = *state_;
    const std::size_t parts = std::min<std::size_t>(s.jobs, std::max<std::size_t>(1, chunk.size()));
    std::vector<State::Partition> results(parts);
    const std::size_t per = (chunk.size() + parts - 1) / std::max<std::size_t>(parts, 1);
    if (parts == 1) {
        s.evaluate(chunk, s.sequence, results[0]);
    } else {
        std::vector<std::jthread> workers;
        workers.reserve(parts);
        for (std::size_t p = 0; p < parts; ++p) {
            const std::size_t begin = std::min(chunk.size(), p * per);
            const std::size_t end = std::min(chunk.size(), begin + per);
            workers.emplace_back([&, p, begin, end] { s.evaluate(chunk.subspan(begin, end - begin), s.sequence + begin, results[p]); });
        }
    }
    for (auto& r : results) {
        s.tally.merge(r.tally);
        std::move(r.failures.begin(), r.failures.end(), std::back_inserter(s.failures));
    }

    // Uniqueness bookkeeping: O(distinct ids) memory, one skeleton kept per id.
    for (std::size_t i = 0; i < chunk.size(); ++i) {
        const auto& r = chunk[i];
        if (!r.unit_id || !test_applies(2, r.technology)) {
            continue;
        }
        ++s.tally.evaluated[2][index_of(r.technology)];
        auto& slot = s.ids[index_of(r.technology)][*r.unit_id];
        if (slot.count == 0) {
            slot.first = Pending{skeleton(r), s.sequence + i};
        } else {
            slot.others.push_back(Pending{skeleton(r), s.sequence + i});
        }
        ++slot.count;
    }
    s.sequence += chunk.size();
}

SuiteResult SuiteRunner::finish()
{
    auto& s = *state_;
    std::unordered_map<std::uint64_t, std::size_t> by_sequence;
    by_sequence.reserve(s.failures.size());
    for (std::size_t i = 0; i < s.failures.size(); ++i) {
        by_sequence.emplace(s.failures[i].sequence, i);
    }
    for (std::size_t ti = 0; ti < s.ids.size(); ++ti) {
        for (auto& [id, slot] : s.ids[ti]) {
            if (slot.count < 2) {
                continue;
            }
            auto mark = [&](Pending& member) {
                RuleOutcome o;
                o.unit_id = id;
                o.test_id = 2;
                o.passed = false;
                o.detail = "duplicate unit_id";
                o.measured = static_cast<double>(slot.count);
                o.measured_unit = "occurrences";
                ++s.tally.failed[2][ti];
                auto it = by_sequence.find(member.sequence);
                if (it != by_sequence.end()) {
                    s.failures[it->second].record.outcomes.push_back(std::move(o));
                } else {
                    member.record.outcomes.push_back(std::move(o));
                    by_sequence.emplace(member.sequence, s.failures.size());
                    s.failures.push_back(std::move(member));
                }
            };
            mark(slot.first);
            for (auto& other : slot.others) {
                mark(other);
            }
        }
        s.ids[ti].clear();
    }

    for (auto& p : s.failures) {
        std::stable_sort(p.record.outcomes.begin(), p.record.outcomes.end(),
                         [](const RuleOutcome& a, const RuleOutcome& b) { return a.test_id < b.test_id; });
    }
    std::sort(s.failures.begin(), s.failures.end(), [](const Pending& a, const Pending& b) {
        if (a.record.unit_id != b.record.unit_id) {
            return a.record.unit_id < b.record.unit_id;
        }
        if (a.record.technology != b.record.technology) {
            return a.record.technology < b.record.technology;
        }
        return a.sequence < b.sequence;
    });

    SuiteResult result;
    result.tally = s.tally;
    result.records = s.sequence;
    result.failures.reserve(s.failures.size());
    for (auto& p : s.failures) {
        result.failures.push_back(std::move(p.record));
    }
    s.failures.clear();
    return result;
}

SuiteResult run_suite(std::span<const UnitRecord> records, const EvaluationContext& ctx, unsigned jobs)
{
    SuiteRunner runner(ctx, jobs);
    runner.consume(records);
    return runner.finish();
}

} // namespace registrylint
