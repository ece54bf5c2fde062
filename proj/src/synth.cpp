#include "registrylint/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <deque>
#include <numbers>
#include <random>

namespace registrylint::synth {

namespace {

using T = Technology;
using Rng = std::mt19937_64;

constexpr double kMetersPerDegree = geo::kEarthRadiusM * std::numbers::pi / 180.0;

constexpr const char* kRooftopType = "Bauliche Anlagen (Hausdach, Gebäude und Fassade)";
constexpr const char* kGroundType = "Freifläche";
constexpr const char* kBalconyType = "Steckerfertige Erzeugungsanlage (sog. Plug-In- oder Balkonkraftwerk)";

std::string zero_pad(std::uint64_t value, int width)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*llu", width, static_cast<unsigned long long>(value));
    return buf;
}

double uniform(Rng& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi)
{
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double log_uniform(Rng& rng, double lo, double hi)
{
    return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

bool chance(Rng& rng, double p)
{
    return std::bernoulli_distribution(p)(rng);
}

std::string lower(std::string_view s)
{
    std::string out(s);
    for (auto& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

bool contains_lower(std::string_view haystack, std::string_view needle_lower)
{
    return lower(haystack).find(needle_lower) != std::string::npos;
}

geo::Ring rectangle(double lat0, double lon0, double lat1, double lon1)
{
    return {{lat0, lon0}, {lat0, lon1}, {lat1, lon1}, {lat1, lon0}, {lat0, lon0}};
}

std::pair<int, int> year_span(Technology t)
{
    switch (t) {
    case T::Biomass: return {1995, 2024};
    case T::Combustion: return {1950, 2024};
    case T::Hydro: return {1905, 2024};
    case T::Solar: return {2000, 2024};
    case T::Storage: return {2013, 2024};
    case T::Wind: return {1990, 2024};
    }
    return {2000, 2024};
}

// ---------------------------------------------------------------------------
// Plausibility oracle: recomputes the arithmetic tests from the thresholds alone.

struct Prediction {
    std::set<int> failing;
    bool ambiguous = false;
};

bool all_digits(std::string_view s, std::size_t n)
{
    return s.size() == n && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

bool unit_id_shape(std::string_view s)
{
    return s.size() == 15 && std::all_of(s.begin(), s.begin() + 3, [](unsigned char c) { return c >= 'A' && c <= 'Z'; }) &&
           all_digits(s.substr(3), 12);
}

std::optional<double> rated_power(const UnitRecord& r)
{
    return (r.technology == T::Solar || r.technology == T::Storage) ? r.power_net_kw : r.power_kw;
}

Prediction predict(const UnitRecord& r, const RuleConfig& c)
{
    Prediction p;
    const auto t = r.technology;
    auto near = [](double v, double bound) { return std::fabs(v - bound) <= 1e-9 * std::max(1.0, std::fabs(bound)); };
    auto ranged = [&](int test, double v, double lo, double hi) {
        if (near(v, lo) || near(v, hi)) {
            p.ambiguous = true;
        }
        if (v < lo || v > hi) {
            p.failing.insert(test);
        }
    };

    for (const auto& name : c.required_fields[index_of(t)]) {
        const bool missing = name == "power" ? !rated_power(r).has_value()
                                             : (find_field(name) != nullptr && is_null(r, *find_field(name)));
        if (missing) {
            p.failing.insert(1);
        }
    }

    const bool pv_like = t == T::Solar || t == T::Storage;
    if (pv_like && r.power_net_kw) {
        const double net = *r.power_net_kw;
        if (r.power_gross_kw && *r.power_gross_kw < net) {
            p.failing.insert(3);
        }
        if (r.power_inverter_kw && *r.power_inverter_kw < net) {
            p.failing.insert(4);
        }
    }

    if ((r.unit_id && !unit_id_shape(*r.unit_id)) || (r.municipality_id && !all_digits(*r.municipality_id, 8)) ||
        (r.zip_code && !all_digits(*r.zip_code, 5))) {
        p.failing.insert(5);
    }

    if (t == T::Solar && r.power_gross_kw && r.number_of_modules) {
        if (*r.number_of_modules <= 0) {
            p.failing.insert(6);
        } else {
            ranged(6, *r.power_gross_kw * 1000.0 / static_cast<double>(*r.number_of_modules), c.module_power_w.lo,
                   c.module_power_w.hi);
        }
    }

    if (pv_like && r.power_gross_kw && r.power_inverter_kw) {
        const double g = *r.power_gross_kw;
        const double i = *r.power_inverter_kw;
        if (g <= 0.0 || i <= 0.0) {
            p.failing.insert(7);
        } else {
            const double ratio = std::max(g / i, i / g);
            if (near(ratio, c.inverter_ratio_factor)) {
                p.ambiguous = true;
            }
            if (ratio >= c.inverter_ratio_factor) {
                p.failing.insert(7);
            }
        }
    }

    if (t == T::Solar && r.unit_type && *r.unit_type == kGroundType && r.power_gross_kw && r.area_ha) {
        if (*r.area_ha <= 0.0) {
            p.failing.insert(8);
        } else {
            ranged(8, *r.power_gross_kw / 1000.0 / *r.area_ha, c.area_density_mw_per_ha.lo, c.area_density_mw_per_ha.hi);
        }
    }

    if (t == T::Wind && r.power_kw && r.rotor_diameter_m) {
        const double d = *r.rotor_diameter_m;
        if (d <= 0.0) {
            p.failing.insert(9);
        } else {
            ranged(9, *r.power_kw * 1000.0 / (std::numbers::pi * d * d / 4.0), c.rotor_specific_power_w_per_m2.lo,
                   c.rotor_specific_power_w_per_m2.hi);
        }
    }

    if (const auto power = rated_power(r)) {
        const double mw = *power / 1000.0;
        const auto& range = c.power_range(t);
        if (near(mw, range.lo) || near(mw, range.hi)) {
            p.ambiguous = true;
        }
        if (!(mw > range.lo) || mw > range.hi) {
            p.failing.insert(12);
        }
    }

    if (r.installation_year) {
        const auto& years = c.years(t);
        if (*r.installation_year < years.min || *r.installation_year > years.max) {
            p.failing.insert(13);
        }
    }

    if (t == T::Wind && r.hub_height_m && r.rotor_diameter_m) {
        const double radius = *r.rotor_diameter_m / 2.0;
        if (near(*r.hub_height_m, radius)) {
            p.ambiguous = true;
        }
        if (*r.hub_height_m < radius) {
            p.failing.insert(14);
        }
    }

    if (t == T::Solar && r.power_net_kw) {
        const double net = *r.power_net_kw;
        const double type_limit = c.balcony_limit_kw + c.balcony_tolerance_kw;
        const bool balcony_type = r.unit_type && (contains_lower(*r.unit_type, "balkonkraftwerk") ||
                                                  contains_lower(*r.unit_type, "steckerfertige erzeugungsanlage"));
        const bool balcony_name =
            r.unit_name && (contains_lower(*r.unit_name, "balkon") || contains_lower(*r.unit_name, "balcony"));
        if ((balcony_type && near(net, type_limit)) || (balcony_name && near(net, c.balcony_name_limit_kw))) {
            p.ambiguous = true;
        }
        if ((balcony_type && net > type_limit) || (balcony_name && net > c.balcony_name_limit_kw)) {
            p.failing.insert(15);
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Clean generation per technology

void fill_solar(UnitRecord& r, Rng& rng, std::size_t i)
{
    r.combination_with_storage = "Kein Stromspeicher";
    r.orientation = "Süd";
    if (chance(rng, 0.2)) {
        r.orientation_secondary = "West";
    }
    const double kind = uniform(rng, 0.0, 1.0);
    if (kind < 0.8) {
        const int modules = uniform_int(rng, 4, 200);
        const double watt = uniform(rng, 250.0, 450.0);
        r.unit_type = kRooftopType;
        r.number_of_modules = modules;
        r.power_gross_kw = modules * watt / 1000.0;
        r.unit_name = "PV-Anlage " + std::to_string(i + 1);
    } else if (kind < 0.9) {
        const double gross_kw = uniform(rng, 500.0, 20'000.0);
        r.unit_type = kGroundType;
        r.number_of_modules = static_cast<std::int64_t>(std::llround(gross_kw * 1000.0 / uniform(rng, 300.0, 450.0)));
        r.power_gross_kw = gross_kw;
        r.area_ha = gross_kw / 1000.0 / uniform(rng, 0.3, 1.0);
        r.unit_name = "Solarpark " + std::to_string(i + 1);
    } else {
        const int modules = uniform_int(rng, 1, 2);
        r.unit_type = kBalconyType;
        r.number_of_modules = modules;
        r.power_gross_kw = modules * uniform(rng, 300.0, 400.0) / 1000.0;
        r.power_inverter_kw = chance(rng, 0.5) ? 0.6 : 0.8;
        r.unit_name = "Balkonkraftwerk " + std::to_string(i + 1);
    }
    if (!r.power_inverter_kw) {
        r.power_inverter_kw = *r.power_gross_kw * uniform(rng, 0.8, 1.25);
    }
    r.power_net_kw = std::min(*r.power_gross_kw, *r.power_inverter_kw) * uniform(rng, 0.9, 1.0);
}

void fill_storage(UnitRecord& r, Rng& rng, std::size_t i)
{
    const double net = chance(rng, 0.9) ? uniform(rng, 2.0, 20.0) : uniform(rng, 1000.0, 50'000.0);
    r.power_net_kw = net;
    r.power_gross_kw = net * uniform(rng, 1.0, 1.2);
    r.power_inverter_kw = net * uniform(rng, 1.0, 1.3);
    r.storage_capacity_kwh = net * uniform(rng, 1.0, 3.0);
    r.battery_technology = "Lithium-Batterie";
    r.unit_name = "Speicher " + std::to_string(i + 1);
}

void fill_wind(UnitRecord& r, Rng& rng, std::size_t i)
{
    const double d = uniform(rng, 40.0, 170.0);
    const double specific = uniform(rng, 200.0, 500.0);
    r.rotor_diameter_m = d;
    r.power_kw = specific * std::numbers::pi * d * d / 4.0 / 1000.0;
    r.hub_height_m = uniform(rng, std::max(d / 2.0 + 10.0, 50.0), d / 2.0 + 100.0);
    r.wind_technology = "Horizontalläufer";
    r.type_description = "E-70 E4";
    r.manufacturer = "ENERCON GmbH";
    r.position = "Windkraft an Land";
    r.unit_name = "Windpark " + std::to_string(i / 5 + 1) + " WEA " + std::to_string(i % 5 + 1);
}

} // namespace

// ---------------------------------------------------------------------------
// Grid

SyntheticGrid::SyntheticGrid(GridSpec spec)
: spec_(spec)
{
    if (spec.district_rows <= 0 || spec.district_cols <= 0 || spec.municipality_rows <= 0 ||
        spec.municipality_cols <= 0 || !(spec.municipality_lat_deg > 0.0) || !(spec.municipality_lon_deg > 0.0)) {
        throw SynthError("grid dimensions must be positive");
    }
    const int district_count = spec.district_rows * spec.district_cols;
    if (district_count > 999 || spec.municipality_rows * spec.municipality_cols > 999) {
        throw SynthError("grid too large for 5-digit district and 8-digit municipality keys");
    }
    const double dlat = spec.municipality_lat_deg;
    const double dlon = spec.municipality_lon_deg;
    auto lat_at = [&](int row) { return spec.origin_lat + row * dlat; };
    auto lon_at = [&](int col) { return spec.origin_lon + col * dlon; };

    std::vector<geo::Region> districts;
    std::vector<geo::Region> municipalities;
    int zip = 10000;
    try {
        for (int dr = 0; dr < spec.district_rows; ++dr) {
            for (int dc = 0; dc < spec.district_cols; ++dc) {
                const int d = dr * spec.district_cols + dc;
                const auto district_id = zero_pad(5000 + static_cast<std::uint64_t>(d) + 1, 5);
                const auto district_name = "Kreis " + std::to_string(d + 1);
                const int row0 = dr * spec.municipality_rows;
                const int col0 = dc * spec.municipality_cols;
                districts.emplace_back(
                    district_id, district_name,
                    std::vector<geo::Polygon>{{rectangle(lat_at(row0), lon_at(col0), lat_at(row0 + spec.municipality_rows),
                                                         lon_at(col0 + spec.municipality_cols)),
                                               {}}});
                for (int mr = 0; mr < spec.municipality_rows; ++mr) {
                    for (int mc = 0; mc < spec.municipality_cols; ++mc) {
                        const int m = mr * spec.municipality_cols + mc;
                        GridCell cell;
                        cell.district_id = district_id;
                        cell.district = district_name;
                        cell.municipality_id = district_id + zero_pad(static_cast<std::uint64_t>(m) + 1, 3);
                        cell.municipality = "Gemeinde " + cell.municipality_id;
                        cell.zip_code = std::to_string(zip++);
                        cell.box = {lat_at(row0 + mr), lon_at(col0 + mc), lat_at(row0 + mr + 1), lon_at(col0 + mc + 1)};
                        cell.south_on_district = mr == 0;
                        cell.north_on_district = mr == spec.municipality_rows - 1;
                        cell.west_on_district = mc == 0;
                        cell.east_on_district = mc == spec.municipality_cols - 1;
                        municipalities.emplace_back(
                            cell.municipality_id, cell.municipality,
                            std::vector<geo::Polygon>{
                                {rectangle(cell.box.min_lat, cell.box.min_lon, cell.box.max_lat, cell.box.max_lon), {}}});
                        by_id_.emplace(cell.municipality_id, cells_.size());
                        cells_.push_back(std::move(cell));
                    }
                }
            }
        }
    } catch (const geo::GeoError& e) {
        throw SynthError(std::string("degenerate synthetic region: ") + e.what());
    }
    if (zip > 99999) {
        throw SynthError("grid too large for 5-digit zip codes");
    }
    const double lat_margin = kPlacementMarginM / kMetersPerDegree;
    const double max_abs_lat = std::max(std::fabs(lat_at(0)), std::fabs(lat_at(spec.district_rows * spec.municipality_rows)));
    const double lon_margin = kPlacementMarginM / (kMetersPerDegree * std::cos(max_abs_lat * std::numbers::pi / 180.0));
    if (!(dlat > 2.0 * lat_margin) || !(dlon > 2.0 * lon_margin)) {
        throw SynthError("municipality cells too small for the placement margin");
    }
    districts_ = geo::BoundarySet(geo::BoundaryLevel::District, std::move(districts));
    municipalities_ = geo::BoundarySet(geo::BoundaryLevel::Municipality, std::move(municipalities));
}

const GridCell* SyntheticGrid::cell(std::string_view municipality_id) const
{
    const auto it = by_id_.find(municipality_id);
    return it == by_id_.end() ? nullptr : &cells_[it->second];
}

std::vector<UnitRecord> generate_clean(Technology technology, std::size_t n, std::uint64_t seed,
                                       const SyntheticGrid& grid)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index_of(technology)), 0x5EEDu};
    Rng rng(seq);
    const auto& cells = grid.cells();
    if (cells.empty() && n > 0) {
        throw SynthError("grid has no cells");
    }
    constexpr std::uint64_t kIdSpace = 100'000'000'000ULL;
    const std::uint64_t id_offset = std::uniform_int_distribution<std::uint64_t>(0, kIdSpace - 1)(rng);
    const auto [year_lo, year_hi] = year_span(technology);
    const double lat_margin = kPlacementMarginM / kMetersPerDegree;

    std::vector<UnitRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        UnitRecord r;
        r.technology = technology;
        // 7919 is prime and coprime to 10^11, so ids stay distinct for any n below 10^11.
        r.unit_id = "SEE" + std::to_string(index_of(technology) + 1) +
                    zero_pad((id_offset + static_cast<std::uint64_t>(i) * 7919ULL) % kIdSpace, 11);
        r.owner_id = "ABR" + zero_pad(std::uniform_int_distribution<std::uint64_t>(0, 999'999'999'999ULL)(rng), 12);
        r.operating_status = "In Betrieb";
        r.grid_operator_inspection = chance(rng, 0.7);
        const int year = uniform_int(rng, year_lo, year_hi);
        r.installation_year = year;
        r.commissioning_date = Date{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(uniform_int(rng, 1, 12))},
                                    std::chrono::day{static_cast<unsigned>(uniform_int(rng, 1, 28))}};
        r.download_date = Date{std::chrono::year{2024}, std::chrono::month{3}, std::chrono::day{12}};

        const auto& cell = cells[std::uniform_int_distribution<std::size_t>(0, cells.size() - 1)(rng)];
        r.zip_code = cell.zip_code;
        r.municipality = cell.municipality;
        r.municipality_id = cell.municipality_id;
        r.district = cell.district;
        r.district_id = cell.district_id;
        const double cos_lat = std::cos(std::max(std::fabs(cell.box.min_lat), std::fabs(cell.box.max_lat)) * std::numbers::pi / 180.0);
        const double lon_margin = kPlacementMarginM / (kMetersPerDegree * cos_lat);
        r.coordinate = LatLon{uniform(rng, cell.box.min_lat + lat_margin, cell.box.max_lat - lat_margin),
                              uniform(rng, cell.box.min_lon + lon_margin, cell.box.max_lon - lon_margin)};

        switch (technology) {
        case T::Solar: fill_solar(r, rng, i); break;
        case T::Storage: fill_storage(r, rng, i); break;
        case T::Wind: fill_wind(r, rng, i); break;
        case T::Biomass:
            r.power_kw = log_uniform(rng, 50.0, 20'000.0);
            r.combustion_technology = "Verbrennungsmotor";
            r.fuel_type = "Gasförmige Biomasse";
            r.unit_name = "Biogasanlage " + std::to_string(i + 1);
            break;
        case T::Combustion:
            r.power_kw = log_uniform(rng, 100.0, 800'000.0);
            r.energy_carrier = "Erdgas";
            r.unit_name = "BHKW " + std::to_string(i + 1);
            break;
        case T::Hydro:
            r.power_kw = log_uniform(rng, 10.0, 200'000.0);
            r.type_of_inflow = "Flusskraftwerk";
            r.plant_type = "Laufwasseranlage";
            r.unit_name = "Wasserkraftanlage " + std::to_string(i + 1);
            break;
        }
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Error classes

std::string_view to_string(ErrorClass c)
{
    switch (c) {
    case ErrorClass::MagnitudeMixup: return "magnitude_mixup";
    case ErrorClass::PlaceholderModules: return "placeholder_modules";
    case ErrorClass::CoordinateDisplacement: return "coordinate_displacement";
    case ErrorClass::NullRequiredField: return "null_required_field";
    case ErrorClass::DuplicateId: return "duplicate_id";
    case ErrorClass::ImplausibleYear: return "implausible_year";
    case ErrorClass::BalconyOverpower: return "balcony_overpower";
    case ErrorClass::HubRotorSwap: return "hub_rotor_swap";
    case ErrorClass::PowerOutOfRange: return "power_out_of_range";
    case ErrorClass::ZipMalformed: return "zip_malformed";
    }
    return "unknown";
}

std::optional<ErrorClass> parse_error_class(std::string_view text)
{
    for (auto c : kAllErrorClasses) {
        if (to_string(c) == text) {
            return c;
        }
    }
    return std::nullopt;
}

bool error_class_applies(ErrorClass c, Technology technology)
{
    switch (c) {
    case ErrorClass::PlaceholderModules:
    case ErrorClass::BalconyOverpower: return technology == T::Solar;
    case ErrorClass::HubRotorSwap: return technology == T::Wind;
    default: return true;
    }
}

ErrorInjectionSpec ErrorInjectionSpec::uniform_rate(double rate, Technology technology)
{
    ErrorInjectionSpec spec;
    std::size_t applicable = 0;
    for (auto c : kAllErrorClasses) {
        applicable += error_class_applies(c, technology) ? 1 : 0;
    }
    for (auto c : kAllErrorClasses) {
        if (error_class_applies(c, technology)) {
            spec.probability[static_cast<std::size_t>(c)] = rate / static_cast<double>(applicable);
        }
    }
    return spec;
}

void ErrorInjectionSpec::validate(double buffer_m) const
{
    for (auto c : kAllErrorClasses) {
        const double p = probability[static_cast<std::size_t>(c)];
        if (!(p >= 0.0 && p <= 1.0)) {
            throw SynthError("probability of " + std::string(to_string(c)) + " must lie in [0, 1]");
        }
    }
    if (!(displacement_km * 1000.0 > buffer_m) || !std::isfinite(displacement_km)) {
        throw SynthError("displacement must exceed the location buffer");
    }
}

std::map<std::string, std::set<int>> GroundTruth::expected_by_unit() const
{
    std::map<std::string, std::set<int>> out;
    for (const auto& e : injected) {
        out[e.unit_id].insert(e.expected_tests.begin(), e.expected_tests.end());
    }
    return out;
}

nlohmann::ordered_json GroundTruth::to_json() const
{
    nlohmann::ordered_json items = nlohmann::ordered_json::array();
    for (const auto& e : injected) {
        items.push_back(
            {{"row", e.row}, {"unit_id", e.unit_id}, {"error", to_string(e.error)}, {"expected_tests", e.expected_tests}});
    }
    nlohmann::ordered_json doc;
    doc["technology"] = registrylint::to_string(technology);
    doc["records"] = records;
    doc["injected_count"] = injected.size();
    doc["injected"] = std::move(items);
    return doc;
}

GroundTruth GroundTruth::from_json(const nlohmann::json& doc)
{
    GroundTruth truth;
    try {
        const auto tech = parse_technology(doc.at("technology").get<std::string>());
        if (!tech) {
            throw SynthError("ground truth: unknown technology");
        }
        truth.technology = *tech;
        truth.records = doc.at("records").get<std::size_t>();
        for (const auto& item : doc.at("injected")) {
            InjectedError e;
            e.row = item.at("row").get<std::size_t>();
            e.unit_id = item.at("unit_id").get<std::string>();
            const auto c = parse_error_class(item.at("error").get<std::string>());
            if (!c) {
                throw SynthError("ground truth: unknown error class");
            }
            e.error = *c;
            e.expected_tests = item.at("expected_tests").get<std::vector<int>>();
            truth.injected.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SynthError(std::string("ground truth: ") + e.what());
    }
    return truth;
}

// ---------------------------------------------------------------------------
// Injection

namespace {

using Expected = std::optional<std::vector<int>>;

Expected accept(const UnitRecord& modified, const RuleConfig& config)
{
    const auto p = predict(modified, config);
    if (p.ambiguous || p.failing.empty()) {
        return std::nullopt;
    }
    return std::vector<int>(p.failing.begin(), p.failing.end());
}

std::vector<std::optional<double> UnitRecord::*> power_fields(Technology t)
{
    if (t == T::Solar || t == T::Storage) {
        return {&UnitRecord::power_gross_kw, &UnitRecord::power_inverter_kw, &UnitRecord::power_net_kw};
    }
    return {&UnitRecord::power_kw};
}

std::optional<double> UnitRecord::*rated_power_field(Technology t)
{
    return (t == T::Solar || t == T::Storage) ? &UnitRecord::power_net_kw : &UnitRecord::power_kw;
}

class Injector {
public:
    Injector(const RuleConfig& config, const SyntheticGrid* grid, double displacement_km, Rng& rng)
    : config_(config)
    , grid_(grid)
    , displacement_km_(displacement_km)
    , rng_(rng)
    {
    }

    Expected apply(ErrorClass c, UnitRecord& r)
    {
        switch (c) {
        case ErrorClass::MagnitudeMixup: return magnitude(r);
        case ErrorClass::PlaceholderModules: return placeholder(r);
        case ErrorClass::CoordinateDisplacement: return displace(r);
        case ErrorClass::NullRequiredField: return null_field(r);
        case ErrorClass::ImplausibleYear: return year(r);
        case ErrorClass::BalconyOverpower: return balcony(r);
        case ErrorClass::HubRotorSwap: return hub(r);
        case ErrorClass::PowerOutOfRange: return out_of_range(r);
        case ErrorClass::ZipMalformed: return zip(r);
        case ErrorClass::DuplicateId: return std::nullopt; // handled by the caller, needs two rows
        }
        return std::nullopt;
    }

private:
    Expected magnitude(UnitRecord& r)
    {
        std::vector<std::pair<std::optional<double> UnitRecord::*, double>> options;
        for (auto f : power_fields(r.technology)) {
            options.emplace_back(f, 1000.0);
            options.emplace_back(f, 0.001);
        }
        std::shuffle(options.begin(), options.end(), rng_);
        for (const auto& [field, factor] : options) {
            if (!(r.*field)) {
                continue;
            }
            UnitRecord copy = r;
            copy.*field = *(r.*field) * factor;
            if (auto e = accept(copy, config_)) {
                r = std::move(copy);
                return e;
            }
        }
        return std::nullopt;
    }

    Expected placeholder(UnitRecord& r)
    {
        if (!r.number_of_modules || *r.number_of_modules == 1) {
            return std::nullopt;
        }
        UnitRecord copy = r;
        copy.number_of_modules = 1;
        auto e = accept(copy, config_);
        if (e) {
            r = std::move(copy);
        }
        return e;
    }

    Expected displace(UnitRecord& r)
    {
        if (grid_ == nullptr || !r.coordinate || !r.municipality_id) {
            return std::nullopt;
        }
        const auto* cell = grid_->cell(*r.municipality_id);
        if (cell == nullptr || r.district_id != cell->district_id) {
            return std::nullopt;
        }
        const double dist_m = (displacement_km_ + uniform(rng_, 0.0, 2.0)) * 1000.0;
        const int side = uniform_int(rng_, 0, 3);
        LatLon p = *r.coordinate;
        bool on_district = false;
        const double dlat = dist_m / kMetersPerDegree;
        // Longitude offset whose great-circle distance to the meridian edge is exactly dist_m.
        const double dlon = std::asin(std::sin(dist_m / geo::kEarthRadiusM) / std::cos(p.lat_deg * std::numbers::pi / 180.0)) *
                            180.0 / std::numbers::pi;
        switch (side) {
        case 0:
            p.lat_deg = cell->box.max_lat + dlat;
            on_district = cell->north_on_district;
            break;
        case 1:
            p.lat_deg = cell->box.min_lat - dlat;
            on_district = cell->south_on_district;
            break;
        case 2:
            p.lon_deg = cell->box.max_lon + dlon;
            on_district = cell->east_on_district;
            break;
        default:
            p.lon_deg = cell->box.min_lon - dlon;
            on_district = cell->west_on_district;
            break;
        }
        r.coordinate = p;
        return on_district ? std::vector<int>{10, 11} : std::vector<int>{11};
    }

    Expected null_field(UnitRecord& r)
    {
        std::vector<std::string> names;
        for (const auto& name : config_.required_fields[index_of(r.technology)]) {
            if (name != "unit_id") {
                names.push_back(name);
            }
        }
        std::shuffle(names.begin(), names.end(), rng_);
        for (const auto& name : names) {
            UnitRecord copy = r;
            if (name == "power") {
                if (!(copy.*rated_power_field(r.technology))) {
                    continue;
                }
                copy.*rated_power_field(r.technology) = std::nullopt;
            } else {
                const auto* f = find_field(name);
                if (f == nullptr || is_null(copy, *f)) {
                    continue;
                }
                std::visit([&](auto member) { (copy.*member).reset(); }, f->member);
            }
            if (auto e = accept(copy, config_)) {
                r = std::move(copy);
                return e;
            }
        }
        return std::nullopt;
    }

    Expected year(UnitRecord& r)
    {
        if (!r.installation_year) {
            return std::nullopt;
        }
        const auto& range = config_.years(r.technology);
        UnitRecord copy = r;
        copy.installation_year = chance(rng_, 0.5) ? range.min - uniform_int(rng_, 1, 60) : range.max + uniform_int(rng_, 1, 70);
        auto e = accept(copy, config_);
        if (e) {
            r = std::move(copy);
        }
        return e;
    }

    Expected balcony(UnitRecord& r)
    {
        if (!r.unit_type || !contains_lower(*r.unit_type, "balkonkraftwerk") || !r.power_net_kw || !r.power_gross_kw ||
            !r.power_inverter_kw || !(*r.power_net_kw > 0.0)) {
            return std::nullopt;
        }
        UnitRecord copy = r;
        const double target = uniform(rng_, 1.5, 4.5);
        const double f = target / *r.power_net_kw;
        copy.power_net_kw = target;
        copy.power_gross_kw = *r.power_gross_kw * f;
        copy.power_inverter_kw = *r.power_inverter_kw * f;
        if (copy.number_of_modules) {
            copy.number_of_modules = std::max<std::int64_t>(1, std::llround(static_cast<double>(*r.number_of_modules) * f));
        }
        auto e = accept(copy, config_);
        if (e) {
            r = std::move(copy);
        }
        return e;
    }

    Expected hub(UnitRecord& r)
    {
        if (!r.rotor_diameter_m || !r.hub_height_m) {
            return std::nullopt;
        }
        UnitRecord copy = r;
        copy.hub_height_m = *r.rotor_diameter_m / 2.0 * uniform(rng_, 0.3, 0.9);
        auto e = accept(copy, config_);
        if (e) {
            r = std::move(copy);
        }
        return e;
    }

    Expected out_of_range(UnitRecord& r)
    {
        const auto field = rated_power_field(r.technology);
        if (!(r.*field)) {
            return std::nullopt;
        }
        UnitRecord copy = r;
        copy.*field = chance(rng_, 0.5) ? 0.0 : config_.power_range(r.technology).hi * uniform(rng_, 1.1, 3.0) * 1000.0;
        auto e = accept(copy, config_);
        if (e) {
            r = std::move(copy);
        }
        return e;
    }

    Expected zip(UnitRecord& r)
    {
        if (!r.zip_code || r.zip_code->size() < 2) {
            return std::nullopt;
        }
        UnitRecord copy = r;
        copy.zip_code = chance(rng_, 0.5) ? r.zip_code->substr(1) : *r.zip_code + std::to_string(uniform_int(rng_, 0, 9));
        auto e = accept(copy, config_);
        if (e) {
            r = std::move(copy);
        }
        return e;
    }

    const RuleConfig& config_;
    const SyntheticGrid* grid_;
    double displacement_km_;
    Rng& rng_;
};

} // namespace

InjectionResult inject_errors(std::vector<UnitRecord> records, const ErrorInjectionSpec& spec, std::uint64_t seed,
                              const RuleConfig& config, const SyntheticGrid* grid)
{
    spec.validate(config.buffer_m);
    InjectionResult result;
    result.truth.records = records.size();
    if (!records.empty()) {
        result.truth.technology = records.front().technology;
    }
    const auto tech = result.truth.technology;
    for (const auto& r : records) {
        if (r.technology != tech) {
            throw SynthError("records of several technologies passed to inject_errors");
        }
    }

    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index_of(tech)), 0x1E7Cu};
    Rng rng(seq);

    std::array<std::size_t, kErrorClassCount> counts{};
    std::size_t targets = 0;
    for (auto c : kAllErrorClasses) {
        const auto k = static_cast<std::size_t>(c);
        if (spec.count[k]) {
            if (*spec.count[k] > 0 && !error_class_applies(c, tech)) {
                throw SynthError(std::string(to_string(c)) + " does not apply to " + std::string(registrylint::to_string(tech)));
            }
            counts[k] = *spec.count[k];
        } else if (spec.probability[k] > 0.0 && error_class_applies(c, tech) && !records.empty()) {
            counts[k] = std::binomial_distribution<std::size_t>(records.size(), spec.probability[k])(rng);
        }
        if (c == ErrorClass::CoordinateDisplacement && counts[k] > 0 && grid == nullptr) {
            throw SynthError("coordinate displacement needs the synthetic grid");
        }
        targets += counts[k] * (c == ErrorClass::DuplicateId ? 2 : 1);
    }
    if (targets > records.size()) {
        throw SynthError("injection needs " + std::to_string(targets) + " distinct records but the table has " +
                         std::to_string(records.size()));
    }

    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::shuffle(order.begin(), order.end(), rng);
    std::deque<std::size_t> pool(order.begin(), order.end());

    Injector injector(config, grid, spec.displacement_km, rng);
    for (auto c : kAllErrorClasses) {
        for (std::size_t n = 0; n < counts[static_cast<std::size_t>(c)]; ++n) {
            if (c == ErrorClass::DuplicateId) {
                // Any two ids work: both rows fail uniqueness, nothing else changes.
                auto pick = std::find_if(pool.begin(), pool.end(), [&](std::size_t i) { return records[i].unit_id.has_value(); });
                if (pick == pool.end()) {
                    throw SynthError("not enough eligible records for duplicate_id");
                }
                const auto a = *pick;
                pool.erase(pick);
                if (pool.empty()) {
                    throw SynthError("not enough eligible records for duplicate_id");
                }
                const auto b = pool.front();
                pool.pop_front();
                records[b].unit_id = records[a].unit_id;
                for (auto row : {a, b}) {
                    result.truth.injected.push_back({row, *records[a].unit_id, c, {2}});
                }
                continue;
            }
            bool placed = false;
            for (auto it = pool.begin(); it != pool.end(); ++it) {
                auto& record = records[*it];
                if (auto expected = injector.apply(c, record)) {
                    result.truth.injected.push_back({*it, record.unit_id.value_or(""), c, std::move(*expected)});
                    pool.erase(it);
                    placed = true;
                    break;
                }
            }
            if (!placed) {
                throw SynthError("not enough eligible records for " + std::string(to_string(c)));
            }
        }
    }
    std::sort(result.truth.injected.begin(), result.truth.injected.end(),
              [](const InjectedError& a, const InjectedError& b) { return a.row < b.row; });
    result.records = std::move(records);
    return result;
}

} // namespace registrylint::synth
