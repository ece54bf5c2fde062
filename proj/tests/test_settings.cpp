#include "registrylint/settings.hpp"

#include <doctest.h>

using namespace registrylint;

TEST_CASE("defaults validate")
{
    Settings s;
    CHECK_NOTHROW(s.validate());
    CHECK(s.rules.buffer_m == 1500.0);
    CHECK(s.report.bin_width_km == 5.0);
}

TEST_CASE("overlay changes only the given keys")
{
    Settings s;
    apply_settings(s, nlohmann::json::parse(R"({
        "rules": {"buffer_m": 2000, "power_range_mw": {"wind": [0, 25]}, "year_range": {"hydro": [1850, 2030]}},
        "ingest": {"delimiter": ";", "mapping": {"wind": {"power_kw": {"column": "leistung", "factor": 1000, "mandatory": true}}}},
        "report": {"overflow_km": {"solar": 200}}
    })"));
    CHECK(s.rules.buffer_m == 2000.0);
    CHECK(s.rules.power_range(Technology::Wind).hi == 25.0);
    CHECK(s.rules.power_range(Technology::Solar).hi == 500.0);
    CHECK(s.rules.years(Technology::Hydro).min == 1850);
    CHECK(s.ingest.delimiter == ';');
    REQUIRE(s.mapping(Technology::Wind).find("power_kw") != nullptr);
    CHECK(s.mapping(Technology::Wind).find("power_kw")->factor == 1000.0);
    CHECK(s.report.overflow_km[index_of(Technology::Solar)] == 200.0);
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("bad documents are rejected")
{
    Settings s;
    CHECK_THROWS_AS(apply_settings(s, nlohmann::json::parse(R"({"rulez": {}})")), ConfigError);
    CHECK_THROWS_AS(apply_settings(s, nlohmann::json::parse(R"({"rules": {"buffer": 1}})")), ConfigError);
    CHECK_THROWS_AS(apply_settings(s, nlohmann::json::parse(R"({"rules": {"buffer_m": "far"}})")), ConfigError);
    CHECK_THROWS_AS(apply_settings(s, nlohmann::json::parse(R"({"rules": {"power_range_mw": {"tidal": [0, 1]}}})")),
                    ConfigError);
    CHECK_THROWS_AS(apply_settings(s, nlohmann::json::parse(R"({"report": {"histogram_test": 9}})")), ConfigError);
    CHECK_THROWS_AS(load_settings("/nonexistent/registrylint.json"), ConfigError);

    CHECK_THROWS_AS(apply_settings(s, nlohmann::json::parse(R"({"rules": {"module_power_range_w": [700, 50]}})")),
                    ConfigError);
    Settings unmapped;
    unmapped.mapping(Technology::Wind).remove("rotor_diameter_m");
    CHECK_THROWS_AS(unmapped.validate(), ConfigError);
}

TEST_CASE("property: settings survive a json round trip")
{
    Settings s;
    apply_settings(s, nlohmann::json::parse(R"({"rules": {"buffer_m": 750, "balcony_keywords": ["balkon"]},
                                                "boundaries": {"district_key": "RS"}})"));
    const auto doc = settings_to_json(s);
    Settings back;
    apply_settings(back, nlohmann::json::parse(doc.dump()));
    CHECK(settings_to_json(back) == doc);
}
