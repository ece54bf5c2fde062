#pragma once

#include "registrylint/ingest.hpp"
#include "registrylint/report.hpp"
#include "registrylint/rules.hpp"

#include <json.hpp>

#include <filesystem>
#include <vector>

namespace registrylint {

/// Everything a run can configure. Config files overlay these compiled-in defaults;
/// unknown keys are rejected with ConfigError.
struct Settings {
    RuleConfig rules;
    IngestOptions ingest;
    /// Indexed by index_of(Technology).
    std::vector<ColumnMapping> mappings;
    BoundaryOptions district_boundaries;
    BoundaryOptions municipality_boundaries;
    ReportOptions report;

    Settings();

    const ColumnMapping& mapping(Technology t) const { return mappings[index_of(t)]; }
    ColumnMapping& mapping(Technology t) { return mappings[index_of(t)]; }

    /// Validates rules and every mapping.
    void validate() const;
};

void apply_settings(Settings& settings, const nlohmann::json& doc);
Settings load_settings(const std::filesystem::path& file);

/// Full key tree with current values; loading it back yields the same settings.
nlohmann::ordered_json settings_to_json(const Settings& settings);

} // namespace registrylint
