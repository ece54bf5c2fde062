#include "registrylint/ingest.hpp"

#include "registrylint/csv.hpp"
#include "registrylint/rules.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_map>

namespace registrylint {

namespace {

using json = nlohmann::json;

std::string_view trim(std::string_view s)
{
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

/// Header names compare case-insensitively with spaces and dashes treated as underscores.
std::string normalize_column(std::string_view name)
{
    std::string out;
    for (unsigned char c : trim(name)) {
        if (c == ' ' || c == '-') {
            out.push_back('_');
        } else {
            out.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    return out;
}

bool is_coordinate_part(std::string_view field)
{
    return field == "latitude" || field == "longitude";
}

std::optional<std::int64_t> parse_integral(std::string_view text)
{
    const auto v = parse_decimal(text);
    if (!v || std::floor(*v) != *v || std::fabs(*v) > 9.0e15) {
        return std::nullopt;
    }
    return static_cast<std::int64_t>(*v);
}

std::optional<bool> parse_flag(std::string_view text)
{
    std::string s = normalize_column(text);
    if (s == "1" || s == "true" || s == "ja" || s == "yes" || s == "1.0") {
        return true;
    }
    if (s == "0" || s == "false" || s == "nein" || s == "no" || s == "0.0") {
        return false;
    }
    return std::nullopt;
}

std::optional<LatLon> parse_coordinate(std::string_view text)
{
    std::size_t split = text.find(", ");
    std::size_t skip = 2;
    if (split == std::string_view::npos) {
        split = text.find(';');
        skip = 1;
    }
    if (split == std::string_view::npos && std::count(text.begin(), text.end(), ',') == 1) {
        split = text.find(',');
        skip = 1;
    }
    if (split == std::string_view::npos) {
        return std::nullopt;
    }
    const auto lat = parse_decimal(text.substr(0, split));
    const auto lon = parse_decimal(text.substr(split + skip));
    if (!lat || !lon) {
        return std::nullopt;
    }
    return LatLon{*lat, *lon};
}

bool valid_coordinate(const LatLon& c)
{
    return c.lat_deg >= -90.0 && c.lat_deg <= 90.0 && c.lon_deg >= -180.0 && c.lon_deg <= 180.0;
}

std::optional<Date> parse_timestamp(std::string_view text)
{
    if (text.size() > 10 && (text[10] == 'T' || text[10] == ' ')) {
        text = text.substr(0, 10);
    }
    return parse_date(text);
}

} // namespace

std::optional<double> parse_decimal(std::string_view text)
{
    text = trim(text);
    if (text.empty()) {
        return std::nullopt;
    }
    const auto commas = std::count(text.begin(), text.end(), ',');
    const auto dots = std::count(text.begin(), text.end(), '.');
    char decimal = '.';
    if (commas > 0 && dots > 0) {
        decimal = text.find_last_of(',') > text.find_last_of('.') ? ',' : '.';
    } else if (commas == 1) {
        decimal = ',';
    } else if (commas > 1 || dots > 1) {
        decimal = '\0';
    }
    std::string s;
    s.reserve(text.size());
    for (char c : text) {
        if (c == ',' || c == '.') {
            if (c == decimal) {
                s.push_back('.');
            }
            continue;
        }
        s.push_back(c);
    }
    const char* first = s.data();
    if (!s.empty() && s.front() == '+') {
        ++first;
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

// ---------------------------------------------------------------------------
// Column mapping

ColumnMapping::ColumnMapping(Technology technology)
: technology_(technology)
{
}

ColumnMapping ColumnMapping::defaults(Technology technology)
{
    ColumnMapping m(technology);
    const bool single_power = technology != Technology::Solar && technology != Technology::Storage;
    m.set({"mastr_id", "unit_id", 1.0, true});
    m.set({"unit_owner_mastr_id", "owner_id"});
    m.set({"operating_status", "operating_status"});
    m.set({"grid_operator_inspection", "grid_operator_inspection"});
    m.set({"commissioning_date", "commissioning_date"});
    m.set({"planned_commissioning_date", "planned_commissioning_date"});
    m.set({"installation_year", "installation_year"});
    m.set({"download_date", "download_date"});
    m.set({"zip_code", "zip_code"});
    m.set({"municipality", "municipality"});
    m.set({"municipality_id", "municipality_id"});
    m.set({"district", "district"});
    m.set({"district_id", "district_id"});
    m.set({"coordinate", "coordinate"});
    m.set({"unit_name", "unit_name"});
    if (single_power) {
        m.set({"power", "power_kw", 1.0, true});
    } else {
        m.set({"power_gross", "power_gross_kw"});
        m.set({"power_inverter", "power_inverter_kw"});
        m.set({"power_net", "power_net_kw", 1.0, true});
    }
    switch (technology) {
    case Technology::Biomass:
        m.set({"combustion_technology", "combustion_technology"});
        m.set({"fuel_type", "fuel_type"});
        break;
    case Technology::Combustion:
        m.set({"energy_carrier", "energy_carrier"});
        break;
    case Technology::Hydro:
        m.set({"type_of_inflow", "type_of_inflow"});
        m.set({"plant_type", "plant_type"});
        break;
    case Technology::Solar:
        m.set({"combination_with_storage", "combination_with_storage"});
        m.set({"number_of_modules", "number_of_modules"});
        m.set({"orientation", "orientation"});
        m.set({"orientation_secondary", "orientation_secondary"});
        m.set({"unit_type", "unit_type"});
        m.set({"area", "area_ha"});
        break;
    case Technology::Storage:
        m.set({"storage_capacity", "storage_capacity_kwh"});
        m.set({"battery_technology", "battery_technology"});
        break;
    case Technology::Wind:
        m.set({"technology", "wind_technology"});
        m.set({"type_description", "type_description"});
        m.set({"manufacturer", "manufacturer"});
        m.set({"position", "position"});
        m.set({"hub_height", "hub_height_m"});
        m.set({"rotor_diameter", "rotor_diameter_m"});
        break;
    }
    return m;
}

void ColumnMapping::set(MappingEntry entry)
{
    for (auto& e : entries_) {
        if (e.field == entry.field) {
            e = std::move(entry);
            return;
        }
    }
    entries_.push_back(std::move(entry));
}

bool ColumnMapping::remove(std::string_view field)
{
    const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.field == field; });
    if (it == entries_.end()) {
        return false;
    }
    entries_.erase(it);
    return true;
}

const MappingEntry* ColumnMapping::find(std::string_view field) const
{
    for (const auto& e : entries_) {
        if (e.field == field) {
            return &e;
        }
    }
    return nullptr;
}

void ColumnMapping::validate(const RuleConfig& config) const
{
    const auto tech = std::string(to_string(technology_));
    auto fail = [&](const std::string& what) { throw IngestError("column mapping for " + tech + ": " + what); };

    std::unordered_map<std::string, int> covered;
    std::unordered_map<std::string, int> columns;
    for (const auto& e : entries_) {
        if (e.column.empty()) {
            fail("empty raw column for field '" + e.field + "'");
        }
        if (++columns[normalize_column(e.column)] > 1) {
            fail("raw column '" + e.column + "' mapped twice");
        }
        if (!(e.factor > 0.0) || !std::isfinite(e.factor)) {
            fail("factor of '" + e.field + "' must be positive");
        }
        if (is_coordinate_part(e.field)) {
            if (e.factor != 1.0) {
                fail("factor not allowed on '" + e.field + "'");
            }
            ++covered[e.field];
            continue;
        }
        const auto* spec = find_field(e.field);
        if (spec == nullptr) {
            fail("unknown field '" + e.field + "'");
        }
        if (!spec->technologies.contains(technology_)) {
            fail("field '" + e.field + "' does not exist for this technology");
        }
        if (e.factor != 1.0 && spec->kind != FieldKind::Decimal) {
            fail("factor not allowed on non-decimal field '" + e.field + "'");
        }
        ++covered[e.field];
    }
    for (const auto& [field, n] : covered) {
        if (n > 1) {
            fail("field '" + field + "' mapped more than once");
        }
    }
    const int lat = covered.count("latitude") ? 1 : 0;
    const int lon = covered.count("longitude") ? 1 : 0;
    if (lat != lon) {
        fail("latitude and longitude must be mapped together");
    }
    if (lat == 1) {
        if (covered.count("coordinate")) {
            fail("field 'coordinate' mapped more than once");
        }
        covered["coordinate"] = 1;
    }
    for (const auto& f : fields_used_by_tests(technology_, config)) {
        if (!covered.count(f)) {
            fail("field '" + f + "' is read by an enabled test but not mapped");
        }
    }
}

// ---------------------------------------------------------------------------
// Registry reader

struct RegistryReader::Impl {
    csv::Reader reader;
    ColumnMapping mapping;
    IngestOptions options;
    std::size_t width = 0;

    struct Binding {
        std::size_t column;
        const MappingEntry* entry;
        const FieldSpec* spec; // null for latitude / longitude
    };
    std::vector<Binding> bindings;
    std::optional<std::size_t> table_column;
    std::vector<std::string> absent;
    std::size_t rows = 0;
    std::size_t rejected = 0;
    std::vector<std::string> fields;

    Impl(std::istream& in, ColumnMapping m, IngestOptions o)
    : reader(in, o.delimiter)
    , mapping(std::move(m))
    , options(std::move(o))
    {
    }

    void read_header()
    {
        std::vector<std::string> header;
        if (!reader.next(header)) {
            throw IngestError("missing header row");
        }
        width = header.size();
        std::unordered_map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < header.size(); ++i) {
            index.emplace(normalize_column(header[i]), i);
        }
        for (const auto& e : mapping.entries()) {
            const auto it = index.find(normalize_column(e.column));
            if (it == index.end()) {
                if (e.mandatory) {
                    throw IngestError("missing mandatory column '" + e.column + "'");
                }
                absent.push_back(e.column);
                continue;
            }
            bindings.push_back({it->second, &e, is_coordinate_part(e.field) ? nullptr : find_field(e.field)});
        }
        if (!options.table_column.empty()) {
            const auto it = index.find(normalize_column(options.table_column));
            if (it != index.end()) {
                table_column = it->second;
            }
        }
    }

    /// Returns false when the row is rejected.
    bool convert(UnitRecord& r, std::vector<ParseIssue>& issues)
    {
        const std::size_t line = reader.line();
        if (fields.size() != width) {
            issues.push_back({line, {}, "expected " + std::to_string(width) + " fields, found " + std::to_string(fields.size()), true});
            return false;
        }
        if (table_column) {
            const auto cell = trim(fields[*table_column]);
            if (!cell.empty()) {
                const auto t = parse_technology(normalize_column(cell));
                if (t != mapping.technology()) {
                    throw IngestError("line " + std::to_string(line) + ": row of table '" + std::string(cell) +
                                      "' in " + std::string(to_string(mapping.technology())) + " input");
                }
            }
        }
        r = UnitRecord{};
        r.technology = mapping.technology();
        std::optional<double> lat;
        std::optional<double> lon;
        for (const auto& b : bindings) {
            const auto cell = trim(fields[b.column]);
            if (cell.empty()) {
                continue;
            }
            auto issue = [&](std::string reason) {
                issues.push_back({line, b.entry->column, std::move(reason) + ": '" + std::string(cell) + "'", false});
            };
            if (b.spec == nullptr) {
                const auto v = parse_decimal(cell);
                if (!v) {
                    issue("not a number");
                } else {
                    (b.entry->field == "latitude" ? lat : lon) = v;
                }
                continue;
            }
            std::visit(
                [&](auto member) {
                    auto& slot = r.*member;
                    using V = std::decay_t<decltype(*slot)>;
                    if constexpr (std::is_same_v<V, std::string>) {
                        slot = std::string(cell);
                    } else if constexpr (std::is_same_v<V, double>) {
                        const auto v = parse_decimal(cell);
                        if (!v) {
                            issue("not a number");
                        } else if (*v < 0.0) {
                            issue("negative value");
                        } else {
                            slot = *v * b.entry->factor;
                        }
                    } else if constexpr (std::is_same_v<V, std::int64_t>) {
                        const auto v = parse_integral(cell);
                        if (!v) {
                            issue("not an integer");
                        } else if (*v < 0) {
                            issue("negative value");
                        } else {
                            slot = *v;
                        }
                    } else if constexpr (std::is_same_v<V, int>) {
                        const auto v = parse_integral(cell);
                        if (!v || *v < -100000 || *v > 100000) {
                            issue("not a year");
                        } else {
                            slot = static_cast<int>(*v);
                        }
                    } else if constexpr (std::is_same_v<V, Date>) {
                        const auto v = parse_timestamp(cell);
                        if (!v) {
                            issue("not a date");
                        } else {
                            slot = *v;
                        }
                    } else if constexpr (std::is_same_v<V, bool>) {
                        const auto v = parse_flag(cell);
                        if (!v) {
                            issue("not a flag");
                        } else {
                            slot = *v;
                        }
                    } else {
                        const auto v = parse_coordinate(cell);
                        if (!v) {
                            issue("not a coordinate");
                        } else if (!valid_coordinate(*v)) {
                            issue("coordinate out of range");
                        } else {
                            slot = *v;
                        }
                    }
                },
                b.spec->member);
        }
        if (lat && lon) {
            const LatLon c{*lat, *lon};
            if (valid_coordinate(c)) {
                r.coordinate = c;
            } else {
                issues.push_back({line, "latitude/longitude", "coordinate out of range", false});
            }
        } else if (lat || lon) {
            issues.push_back({line, "latitude/longitude", "only one coordinate component present", false});
        }
        if (!r.district_id && r.municipality_id && r.municipality_id->size() >= 5 &&
            std::all_of(r.municipality_id->begin(), r.municipality_id->begin() + 5,
                        [](unsigned char c) { return std::isdigit(c) != 0; })) {
            r.district_id = r.municipality_id->substr(0, 5);
        }
        return true;
    }
};

RegistryReader::RegistryReader(std::istream& in, ColumnMapping mapping, IngestOptions options)
: impl_(std::make_unique<Impl>(in, std::move(mapping), std::move(options)))
{
    impl_->read_header();
}

RegistryReader::~RegistryReader() = default;

bool RegistryReader::next_chunk(std::vector<UnitRecord>& records, std::vector<ParseIssue>& issues)
{
    auto& s = *impl_;
    records.clear();
    const std::size_t limit = std::max<std::size_t>(1, s.options.chunk_size);
    bool any = false;
    while (records.size() < limit && s.reader.next(s.fields)) {
        any = true;
        ++s.rows;
        UnitRecord r;
        if (s.convert(r, issues)) {
            records.push_back(std::move(r));
        } else {
            ++s.rejected;
        }
    }
    return any;
}

const std::vector<std::string>& RegistryReader::absent_columns() const
{
    return impl_->absent;
}

std::size_t RegistryReader::rows() const
{
    return impl_->rows;
}

std::size_t RegistryReader::rejected_rows() const
{
    return impl_->rejected;
}

RegistryTable parse_registry(std::istream& in, const ColumnMapping& mapping, const IngestOptions& options)
{
    RegistryReader reader(in, mapping, options);
    RegistryTable table;
    std::vector<UnitRecord> chunk;
    while (reader.next_chunk(chunk, table.issues)) {
        std::move(chunk.begin(), chunk.end(), std::back_inserter(table.records));
    }
    table.rows = reader.rows();
    table.rejected_rows = reader.rejected_rows();
    return table;
}

RegistryTable parse_registry(const std::filesystem::path& file, const ColumnMapping& mapping,
                             const IngestOptions& options)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw IngestError("cannot open " + file.string());
    }
    return parse_registry(in, mapping, options);
}

void write_registry(std::ostream& out, std::span<const UnitRecord> records, const ColumnMapping& mapping,
                    char delimiter)
{
    std::vector<std::string> row;
    for (const auto& e : mapping.entries()) {
        row.push_back(e.column);
    }
    csv::write_row(out, row, delimiter);
    for (const auto& r : records) {
        row.clear();
        for (const auto& e : mapping.entries()) {
            if (is_coordinate_part(e.field)) {
                row.push_back(!r.coordinate ? std::string()
                                            : format_number(e.field == "latitude" ? r.coordinate->lat_deg
                                                                                  : r.coordinate->lon_deg));
                continue;
            }
            const auto* spec = find_field(e.field);
            if (spec == nullptr) {
                row.emplace_back();
                continue;
            }
            if (spec->kind == FieldKind::Decimal && e.factor != 1.0) {
                const auto& v = r.*std::get<std::optional<double> UnitRecord::*>(spec->member);
                row.push_back(v ? format_number(*v / e.factor) : std::string());
                continue;
            }
            row.push_back(field_to_text(r, *spec));
        }
        csv::write_row(out, row, delimiter);
    }
}

// ---------------------------------------------------------------------------
// Boundaries

namespace {

const json* find_property(const json& props, std::string_view name)
{
    if (!props.is_object()) {
        return nullptr;
    }
    const auto wanted = normalize_column(name);
    for (auto it = props.begin(); it != props.end(); ++it) {
        if (normalize_column(it.key()) == wanted && !it.value().is_null()) {
            return &it.value();
        }
    }
    return nullptr;
}

std::optional<std::string> key_text(const json& v, std::size_t width)
{
    std::string s;
    if (v.is_string()) {
        s = std::string(trim(v.get<std::string>()));
    } else if (v.is_number_integer() || v.is_number_unsigned()) {
        s = std::to_string(v.get<std::int64_t>());
    } else if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::floor(d) != d) {
            return std::nullopt;
        }
        s = std::to_string(static_cast<std::int64_t>(d));
    } else {
        return std::nullopt;
    }
    if (s.empty()) {
        return std::nullopt;
    }
    if (std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; }) && s.size() < width) {
        s.insert(0, width - s.size(), '0');
    }
    return s;
}

geo::Ring parse_ring(const json& coords, std::size_t feature)
{
    const auto where = "feature " + std::to_string(feature);
    if (!coords.is_array()) {
        throw IngestError(where + ": ring is not an array");
    }
    geo::Ring ring;
    ring.reserve(coords.size());
    for (const auto& p : coords) {
        if (!p.is_array() || p.size() < 2 || !p[0].is_number() || !p[1].is_number()) {
            throw IngestError(where + ": malformed position");
        }
        ring.push_back({p[1].get<double>(), p[0].get<double>()});
    }
    if (ring.size() < 4) {
        throw IngestError(where + ": ring has fewer than 4 vertices");
    }
    if (!(ring.front() == ring.back())) {
        throw IngestError(where + ": unclosed ring");
    }
    return ring;
}

geo::Polygon parse_polygon(const json& coords, std::size_t feature)
{
    if (!coords.is_array() || coords.empty()) {
        throw IngestError("feature " + std::to_string(feature) + ": polygon without rings");
    }
    geo::Polygon poly;
    poly.outer = parse_ring(coords[0], feature);
    for (std::size_t i = 1; i < coords.size(); ++i) {
        poly.holes.push_back(parse_ring(coords[i], feature));
    }
    return poly;
}

} // namespace

geo::BoundarySet parse_boundaries(std::istream& in, geo::BoundaryLevel level, const BoundaryOptions& options)
{
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw IngestError(std::string("boundary file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
        !doc["features"].is_array()) {
        throw IngestError("boundary file is not a GeoJSON FeatureCollection");
    }
    const bool district = level == geo::BoundaryLevel::District;
    const std::string key_property = !options.key_property.empty() ? options.key_property : district ? "krs" : "ags";
    const std::size_t key_width = district ? 5 : 8;

    std::vector<geo::Region> regions;
    const auto& features = doc["features"];
    regions.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto& f = features[i];
        const auto where = "feature " + std::to_string(i);
        const json empty = json::object();
        const json& props = f.contains("properties") && f["properties"].is_object() ? f["properties"] : empty;

        std::optional<std::string> key;
        if (const auto* v = find_property(props, key_property)) {
            key = key_text(*v, key_width);
        } else if (district && options.key_property.empty()) {
            if (const auto* ags = find_property(props, "ags")) {
                key = key_text(*ags, 8);
                if (key) {
                    key = key->substr(0, 5);
                }
            }
        }
        if (!key) {
            throw IngestError(where + ": missing region key property '" + key_property + "'");
        }
        std::string name;
        if (const auto* v = find_property(props, options.name_property); v != nullptr && v->is_string()) {
            name = v->get<std::string>();
        }

        if (!f.contains("geometry") || !f["geometry"].is_object()) {
            throw IngestError(where + ": missing geometry");
        }
        const auto& g = f["geometry"];
        const auto type = g.value("type", "");
        if (!g.contains("coordinates")) {
            throw IngestError(where + ": geometry without coordinates");
        }
        std::vector<geo::Polygon> parts;
        if (type == "Polygon") {
            parts.push_back(parse_polygon(g["coordinates"], i));
        } else if (type == "MultiPolygon") {
            if (!g["coordinates"].is_array()) {
                throw IngestError(where + ": malformed multipolygon");
            }
            for (const auto& p : g["coordinates"]) {
                parts.push_back(parse_polygon(p, i));
            }
        } else {
            throw IngestError(where + ": unsupported geometry type '" + type + "'");
        }
        try {
            regions.emplace_back(*key, std::move(name), std::move(parts));
        } catch (const geo::GeoError& e) {
            throw IngestError(where + ": " + e.what());
        }
    }
    try {
        return geo::BoundarySet(level, std::move(regions));
    } catch (const geo::GeoError& e) {
        throw IngestError(e.what());
    }
}

geo::BoundarySet parse_boundaries(const std::filesystem::path& file, geo::BoundaryLevel level,
                                  const BoundaryOptions& options)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw IngestError("cannot open " + file.string());
    }
    try {
        return parse_boundaries(in, level, options);
    } catch (const IngestError& e) {
        throw IngestError(file.string() + ": " + e.what());
    }
}

void write_boundaries(std::ostream& out, const geo::BoundarySet& boundaries)
{
    using ojson = nlohmann::ordered_json;
    const char* key = boundaries.level() == geo::BoundaryLevel::District ? "krs" : "ags";
    auto ring_json = [](const geo::Ring& ring) {
        ojson r = ojson::array();
        for (const auto& p : ring) {
            r.push_back({p.lon_deg, p.lat_deg});
        }
        return r;
    };
    auto polygon_json = [&](const geo::Polygon& poly) {
        ojson rings = ojson::array();
        rings.push_back(ring_json(poly.outer));
        for (const auto& h : poly.holes) {
            rings.push_back(ring_json(h));
        }
        return rings;
    };
    ojson features = ojson::array();
    for (const auto& region : boundaries.regions()) {
        ojson geometry;
        if (region.parts().size() == 1) {
            geometry["type"] = "Polygon";
            geometry["coordinates"] = polygon_json(region.parts().front());
        } else {
            geometry["type"] = "MultiPolygon";
            ojson polys = ojson::array();
            for (const auto& p : region.parts()) {
                polys.push_back(polygon_json(p));
            }
            geometry["coordinates"] = std::move(polys);
        }
        ojson feature;
        feature["type"] = "Feature";
        feature["properties"] = {{key, region.id()}, {"gen", region.name()}};
        feature["geometry"] = std::move(geometry);
        features.push_back(std::move(feature));
    }
    ojson doc;
    doc["type"] = "FeatureCollection";
    doc["features"] = std::move(features);
    out << doc.dump() << '\n';
}

} // namespace registrylint
