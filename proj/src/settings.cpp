#include "registrylint/settings.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace registrylint {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void expect_object(const json& j, const std::string& path)
{
    if (!j.is_object()) {
        throw ConfigError(path + ": expected an object");
    }
}

void reject_unknown(const json& j, const std::string& path, std::initializer_list<std::string_view> known)
{
    expect_object(j, path);
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError(path + ": unknown key '" + key + "'");
        }
    }
}

double number(const json& j, const std::string& path)
{
    if (!j.is_number()) {
        throw ConfigError(path + ": expected a number");
    }
    return j.get<double>();
}

std::string text(const json& j, const std::string& path)
{
    if (!j.is_string()) {
        throw ConfigError(path + ": expected a string");
    }
    return j.get<std::string>();
}

std::vector<std::string> strings(const json& j, const std::string& path)
{
    if (!j.is_array()) {
        throw ConfigError(path + ": expected an array of strings");
    }
    std::vector<std::string> out;
    for (const auto& v : j) {
        out.push_back(text(v, path));
    }
    return out;
}

Range range(const json& j, const std::string& path)
{
    if (!j.is_array() || j.size() != 2) {
        throw ConfigError(path + ": expected [lower, upper]");
    }
    return {number(j[0], path), number(j[1], path)};
}

Technology technology_key(const std::string& key, const std::string& path)
{
    const auto t = parse_technology(key);
    if (!t) {
        throw ConfigError(path + ": unknown technology '" + key + "'");
    }
    return *t;
}

template <typename Fn>
void per_technology(const json& j, const std::string& path, Fn&& fn)
{
    expect_object(j, path);
    for (const auto& [key, value] : j.items()) {
        fn(technology_key(key, path), value, path + "." + key);
    }
}

void apply_rules(RuleConfig& r, const json& j)
{
    const std::string p = "rules";
    reject_unknown(j, p,
                   {"required_fields", "unit_id_pattern", "municipality_id_pattern", "zip_pattern",
                    "module_power_range_w", "inverter_ratio_factor", "area_density_range_mw_per_ha",
                    "rotor_specific_power_range_w_per_m2", "buffer_m", "power_range_mw", "year_range",
                    "balcony_limit_kw", "balcony_tolerance_kw", "balcony_name_limit_kw", "balcony_keywords",
                    "balcony_unit_types", "ground_mounted_unit_types"});
    for (const auto& [key, v] : j.items()) {
        const auto path = p + "." + key;
        if (key == "required_fields") {
            per_technology(v, path, [&](Technology t, const json& list, const std::string& at) {
                r.required_fields[index_of(t)] = strings(list, at);
            });
        } else if (key == "unit_id_pattern") {
            r.unit_id_pattern = IdPattern(text(v, path));
        } else if (key == "municipality_id_pattern") {
            r.municipality_id_pattern = IdPattern(text(v, path));
        } else if (key == "zip_pattern") {
            r.zip_pattern = IdPattern(text(v, path));
        } else if (key == "module_power_range_w") {
            r.module_power_w = range(v, path);
        } else if (key == "inverter_ratio_factor") {
            r.inverter_ratio_factor = number(v, path);
        } else if (key == "area_density_range_mw_per_ha") {
            r.area_density_mw_per_ha = range(v, path);
        } else if (key == "rotor_specific_power_range_w_per_m2") {
            r.rotor_specific_power_w_per_m2 = range(v, path);
        } else if (key == "buffer_m") {
            r.buffer_m = number(v, path);
        } else if (key == "power_range_mw") {
            per_technology(v, path, [&](Technology t, const json& x, const std::string& at) {
                r.power_range_mw[index_of(t)] = range(x, at);
            });
        } else if (key == "year_range") {
            per_technology(v, path, [&](Technology t, const json& x, const std::string& at) {
                const auto yr = range(x, at);
                if (std::floor(yr.lo) != yr.lo || std::floor(yr.hi) != yr.hi) {
                    throw ConfigError(at + ": years must be integers");
                }
                r.year_range[index_of(t)] = {static_cast<int>(yr.lo), static_cast<int>(yr.hi)};
            });
        } else if (key == "balcony_limit_kw") {
            r.balcony_limit_kw = number(v, path);
        } else if (key == "balcony_tolerance_kw") {
            r.balcony_tolerance_kw = number(v, path);
        } else if (key == "balcony_name_limit_kw") {
            r.balcony_name_limit_kw = number(v, path);
        } else if (key == "balcony_keywords") {
            r.balcony_keywords = strings(v, path);
        } else if (key == "balcony_unit_types") {
            r.balcony_unit_types = strings(v, path);
        } else if (key == "ground_mounted_unit_types") {
            r.ground_mounted_unit_types = strings(v, path);
        }
    }
}

void apply_mapping(ColumnMapping& m, const json& j, const std::string& path)
{
    expect_object(j, path);
    for (const auto& [field, v] : j.items()) {
        const auto at = path + "." + field;
        if (v.is_null()) {
            m.remove(field);
            continue;
        }
        MappingEntry e;
        e.field = field;
        if (const auto* old = m.find(field)) {
            e = *old;
        }
        if (v.is_string()) {
            e.column = v.get<std::string>();
        } else {
            reject_unknown(v, at, {"column", "factor", "mandatory"});
            if (v.contains("column")) {
                e.column = text(v["column"], at + ".column");
            }
            if (v.contains("factor")) {
                e.factor = number(v["factor"], at + ".factor");
            }
            if (v.contains("mandatory")) {
                if (!v["mandatory"].is_boolean()) {
                    throw ConfigError(at + ".mandatory: expected true or false");
                }
                e.mandatory = v["mandatory"].get<bool>();
            }
        }
        if (e.column.empty()) {
            throw ConfigError(at + ": raw column name missing");
        }
        m.set(std::move(e));
    }
}

void apply_ingest(Settings& s, const json& j)
{
    reject_unknown(j, "ingest", {"delimiter", "chunk_size", "table_column", "mapping"});
    if (j.contains("delimiter")) {
        const auto d = text(j["delimiter"], "ingest.delimiter");
        if (d.size() != 1 || d == "\"" || d == "\n" || d == "\r") {
            throw ConfigError("ingest.delimiter: expected a single character");
        }
        s.ingest.delimiter = d[0];
    }
    if (j.contains("chunk_size")) {
        const double n = number(j["chunk_size"], "ingest.chunk_size");
        if (!(n >= 1.0) || std::floor(n) != n) {
            throw ConfigError("ingest.chunk_size: expected a positive integer");
        }
        s.ingest.chunk_size = static_cast<std::size_t>(n);
    }
    if (j.contains("table_column")) {
        s.ingest.table_column = text(j["table_column"], "ingest.table_column");
    }
    if (j.contains("mapping")) {
        per_technology(j["mapping"], "ingest.mapping", [&](Technology t, const json& v, const std::string& at) {
            apply_mapping(s.mapping(t), v, at);
        });
    }
}

void apply_boundaries(Settings& s, const json& j)
{
    reject_unknown(j, "boundaries", {"district_key", "municipality_key", "name_property"});
    if (j.contains("district_key")) {
        s.district_boundaries.key_property = text(j["district_key"], "boundaries.district_key");
    }
    if (j.contains("municipality_key")) {
        s.municipality_boundaries.key_property = text(j["municipality_key"], "boundaries.municipality_key");
    }
    if (j.contains("name_property")) {
        const auto name = text(j["name_property"], "boundaries.name_property");
        s.district_boundaries.name_property = name;
        s.municipality_boundaries.name_property = name;
    }
}

void apply_report(ReportOptions& r, const json& j)
{
    reject_unknown(j, "report", {"bin_width_km", "overflow_km", "histogram_test"});
    if (j.contains("bin_width_km")) {
        r.bin_width_km = number(j["bin_width_km"], "report.bin_width_km");
        if (!(r.bin_width_km > 0.0)) {
            throw ConfigError("report.bin_width_km: must be positive");
        }
    }
    if (j.contains("overflow_km")) {
        per_technology(j["overflow_km"], "report.overflow_km", [&](Technology t, const json& v, const std::string& at) {
            const double km = number(v, at);
            if (!(km > 0.0)) {
                throw ConfigError(at + ": must be positive");
            }
            r.overflow_km[index_of(t)] = km;
        });
    }
    if (j.contains("histogram_test")) {
        const double k = number(j["histogram_test"], "report.histogram_test");
        if (k != 10.0 && k != 11.0) {
            throw ConfigError("report.histogram_test: expected 10 or 11");
        }
        r.histogram_test = static_cast<int>(k);
    }
}

} // namespace

Settings::Settings()
{
    for (auto t : kAllTechnologies) {
        mappings.push_back(ColumnMapping::defaults(t));
    }
}

void Settings::validate() const
{
    rules.validate();
    for (const auto& m : mappings) {
        try {
            m.validate(rules);
        } catch (const IngestError& e) {
            throw ConfigError(e.what());
        }
    }
}

void apply_settings(Settings& settings, const json& doc)
{
    reject_unknown(doc, "config", {"rules", "ingest", "boundaries", "report"});
    if (doc.contains("rules")) {
        apply_rules(settings.rules, doc["rules"]);
    }
    if (doc.contains("ingest")) {
        apply_ingest(settings, doc["ingest"]);
    }
    if (doc.contains("boundaries")) {
        apply_boundaries(settings, doc["boundaries"]);
    }
    if (doc.contains("report")) {
        apply_report(settings.report, doc["report"]);
    }
    settings.validate();
}

Settings load_settings(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in) {
        throw ConfigError("cannot open config " + file.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
    Settings s;
    try {
        apply_settings(s, doc);
    } catch (const ConfigError& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
    return s;
}

ojson settings_to_json(const Settings& s)
{
    const auto& r = s.rules;
    auto pair = [](double a, double b) { return ojson::array({a, b}); };

    ojson rules;
    ojson required = ojson::object();
    ojson power = ojson::object();
    ojson years = ojson::object();
    for (auto t : kAllTechnologies) {
        const auto name = std::string(to_string(t));
        required[name] = r.required_fields[index_of(t)];
        power[name] = pair(r.power_range(t).lo, r.power_range(t).hi);
        years[name] = ojson::array({r.years(t).min, r.years(t).max});
    }
    rules["required_fields"] = required;
    rules["unit_id_pattern"] = r.unit_id_pattern.source();
    rules["municipality_id_pattern"] = r.municipality_id_pattern.source();
    rules["zip_pattern"] = r.zip_pattern.source();
    rules["module_power_range_w"] = pair(r.module_power_w.lo, r.module_power_w.hi);
    rules["inverter_ratio_factor"] = r.inverter_ratio_factor;
    rules["area_density_range_mw_per_ha"] = pair(r.area_density_mw_per_ha.lo, r.area_density_mw_per_ha.hi);
    rules["rotor_specific_power_range_w_per_m2"] =
        pair(r.rotor_specific_power_w_per_m2.lo, r.rotor_specific_power_w_per_m2.hi);
    rules["buffer_m"] = r.buffer_m;
    rules["power_range_mw"] = power;
    rules["year_range"] = years;
    rules["balcony_limit_kw"] = r.balcony_limit_kw;
    rules["balcony_tolerance_kw"] = r.balcony_tolerance_kw;
    rules["balcony_name_limit_kw"] = r.balcony_name_limit_kw;
    rules["balcony_keywords"] = r.balcony_keywords;
    rules["balcony_unit_types"] = r.balcony_unit_types;
    rules["ground_mounted_unit_types"] = r.ground_mounted_unit_types;

    ojson mapping = ojson::object();
    for (auto t : kAllTechnologies) {
        ojson m = ojson::object();
        for (const auto& e : s.mapping(t).entries()) {
            m[e.field] = {{"column", e.column}, {"factor", e.factor}, {"mandatory", e.mandatory}};
        }
        mapping[std::string(to_string(t))] = std::move(m);
    }
    ojson ingest;
    ingest["delimiter"] = std::string(1, s.ingest.delimiter);
    ingest["chunk_size"] = s.ingest.chunk_size;
    ingest["table_column"] = s.ingest.table_column;
    ingest["mapping"] = std::move(mapping);

    ojson boundaries;
    boundaries["district_key"] = s.district_boundaries.key_property;
    boundaries["municipality_key"] = s.municipality_boundaries.key_property;
    boundaries["name_property"] = s.municipality_boundaries.name_property;

    ojson report;
    report["bin_width_km"] = s.report.bin_width_km;
    ojson overflow = ojson::object();
    for (auto t : kAllTechnologies) {
        overflow[std::string(to_string(t))] = s.report.overflow_km[index_of(t)];
    }
    report["overflow_km"] = std::move(overflow);
    report["histogram_test"] = s.report.histogram_test;

    ojson doc;
    doc["rules"] = std::move(rules);
    doc["ingest"] = std::move(ingest);
    doc["boundaries"] = std::move(boundaries);
    doc["report"] = std::move(report);
    return doc;
}

} // namespace registrylint
