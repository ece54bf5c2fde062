#include "support.hpp"

#include "registrylint/rules.hpp"
#include "registrylint/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

using namespace registrylint;
using namespace registrylint::synth;

namespace {

struct Indexes {
    geo::SpatialIndex districts;
    geo::SpatialIndex municipalities;
};

const SyntheticGrid& grid()
{
    static const SyntheticGrid g;
    return g;
}

const Indexes& indexes()
{
    static const Indexes ix{geo::SpatialIndex(grid().districts()), geo::SpatialIndex(grid().municipalities())};
    return ix;
}

std::map<std::string, std::set<int>> observed(const SuiteResult& result)
{
    std::map<std::string, std::set<int>> out;
    for (const auto& f : result.failures) {
        for (int t : f.test_ids()) {
            out[f.unit_id].insert(t);
        }
    }
    return out;
}

} // namespace

TEST_CASE("grid layout")
{
    CHECK(grid().districts().size() == 30);
    CHECK(grid().municipalities().size() == 480);
    CHECK(grid().region_count() == 510);
    for (const auto& cell : grid().cells()) {
        CHECK(cell.municipality_id.substr(0, 5) == cell.district_id);
        CHECK(grid().districts().find(cell.district_id) != nullptr);
    }
    CHECK_THROWS_AS(SyntheticGrid(GridSpec{50, 7, 0, 1, 1, 1, 0.1, 0.1}), SynthError);
}

TEST_CASE("generation is deterministic")
{
    CHECK(generate_clean(Technology::Wind, 100, 42, grid()) == generate_clean(Technology::Wind, 100, 42, grid()));
    CHECK(generate_clean(Technology::Wind, 100, 42, grid()) != generate_clean(Technology::Wind, 100, 43, grid()));
    CHECK(generate_clean(Technology::Solar, 0, 5, grid()).empty());
}

TEST_CASE("clean tables pass every test")
{
    const RuleConfig config;
    const EvaluationContext ctx{config, &indexes().districts, &indexes().municipalities};
    for (auto t : kAllTechnologies) {
        const auto records = generate_clean(t, 2000, 1, grid());
        for (const auto& r : records) {
            REQUIRE(schema_violations(r).empty());
        }
        const auto result = run_suite(records, ctx, 2);
        CHECK_MESSAGE(result.failures.empty(), to_string(t));
        for (int test = kFirstTest; test <= kLastTest; ++test) {
            CHECK(result.tally.evaluated[static_cast<std::size_t>(test)][index_of(t)] ==
                  (test_applies(test, t) ? records.size() : 0));
        }
    }
}

TEST_CASE("hand check of sampled clean records")
{
    const auto records = generate_clean(Technology::Wind, 5, 8, grid());
    for (const auto& r : records) {
        const double d = *r.rotor_diameter_m;
        const double specific = *r.power_kw * 1000.0 / (std::numbers::pi * d * d / 4.0);
        CHECK(specific >= 160.0);
        CHECK(specific <= 700.0);
        CHECK(*r.hub_height_m >= d / 2.0);
        CHECK(*r.power_kw > 0.0);
        CHECK(*r.power_kw <= 22'000.0);
        CHECK(*r.installation_year >= 1980);
        CHECK(*r.installation_year <= 2030);
        CHECK(r.unit_id->size() == 15);
        CHECK(r.zip_code->size() == 5);
        const auto* cell = grid().cell(*r.municipality_id);
        REQUIRE(cell != nullptr);
        CHECK(cell->box.contains(*r.coordinate));
        CHECK(*r.district_id == cell->district_id);
    }
}

TEST_CASE("injected errors are detected exactly")
{
    const RuleConfig config;
    const EvaluationContext ctx{config, &indexes().districts, &indexes().municipalities};
    for (auto t : kAllTechnologies) {
        auto clean = generate_clean(t, 3000, 21, grid());
        const auto result = inject_errors(clean, ErrorInjectionSpec::uniform_rate(0.05, t), 21, config, &grid());
        CHECK(result.truth.records == 3000);
        CHECK(result.truth.injected.size() > 50);
        const auto expected = result.truth.expected_by_unit();
        const auto seen = observed(run_suite(result.records, ctx, 2));
        CHECK_MESSAGE(seen == expected, to_string(t));
    }
}

TEST_CASE("exact per-class counts")
{
    const RuleConfig config;
    auto clean = generate_clean(Technology::Solar, 500, 4, grid());
    ErrorInjectionSpec spec;
    spec.count[static_cast<std::size_t>(ErrorClass::MagnitudeMixup)] = 3;
    spec.count[static_cast<std::size_t>(ErrorClass::DuplicateId)] = 1;
    spec.count[static_cast<std::size_t>(ErrorClass::CoordinateDisplacement)] = 4;
    spec.displacement_km = 10.0;
    const auto result = inject_errors(clean, spec, 4, config, &grid());

    std::map<ErrorClass, std::vector<InjectedError>> by_class;
    for (const auto& e : result.truth.injected) {
        by_class[e.error].push_back(e);
    }
    CHECK(by_class[ErrorClass::MagnitudeMixup].size() == 3);
    for (const auto& e : by_class[ErrorClass::MagnitudeMixup]) {
        CHECK(!e.expected_tests.empty());
    }
    REQUIRE(by_class[ErrorClass::DuplicateId].size() == 2);
    CHECK(by_class[ErrorClass::DuplicateId][0].unit_id == by_class[ErrorClass::DuplicateId][1].unit_id);
    for (const auto& e : by_class[ErrorClass::DuplicateId]) {
        CHECK(e.expected_tests == std::vector<int>{2});
    }
    CHECK(by_class[ErrorClass::CoordinateDisplacement].size() == 4);
    for (const auto& e : by_class[ErrorClass::CoordinateDisplacement]) {
        const std::set<int> tests(e.expected_tests.begin(), e.expected_tests.end());
        CHECK(tests.contains(11));
        CHECK(tests.size() <= 2);
    }
}

TEST_CASE("inverter magnitude mixup expectations follow rule arithmetic")
{
    const RuleConfig config;
    auto clean = generate_clean(Technology::Solar, 400, 6, grid());
    ErrorInjectionSpec spec;
    spec.count[static_cast<std::size_t>(ErrorClass::MagnitudeMixup)] = 40;
    const auto result = inject_errors(clean, spec, 6, config, &grid());
    for (const auto& e : result.truth.injected) {
        const auto& r = result.records[e.row];
        const std::set<int> tests(e.expected_tests.begin(), e.expected_tests.end());
        const double gross = *r.power_gross_kw;
        const double inverter = *r.power_inverter_kw;
        const double net = *r.power_net_kw;
        CHECK(tests.contains(7) == (std::max(gross / inverter, inverter / gross) >= 20.0));
        CHECK(tests.contains(4) == (inverter < net));
        CHECK(tests.contains(3) == (gross < net));
    }
}

TEST_CASE("ground truth round trip and validation")
{
    const RuleConfig config;
    auto clean = generate_clean(Technology::Wind, 300, 2, grid());
    const auto result = inject_errors(clean, ErrorInjectionSpec::uniform_rate(0.1, Technology::Wind), 2, config, &grid());
    CHECK(GroundTruth::from_json(nlohmann::json::parse(result.truth.to_json().dump())) == result.truth);

    ErrorInjectionSpec bad;
    bad.probability[0] = 1.5;
    CHECK_THROWS_AS(bad.validate(1500.0), SynthError);
    ErrorInjectionSpec near;
    near.displacement_km = 1.0;
    CHECK_THROWS_AS(near.validate(1500.0), SynthError);

    ErrorInjectionSpec many;
    many.count[static_cast<std::size_t>(ErrorClass::ImplausibleYear)] = 50;
    CHECK_THROWS_AS(inject_errors(generate_clean(Technology::Wind, 10, 1, grid()), many, 1, config, &grid()), SynthError);

    for (auto c : kAllErrorClasses) {
        CHECK(parse_error_class(to_string(c)) == c);
    }
}
