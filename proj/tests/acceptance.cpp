// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any criterion fails.

#include "support.hpp"

#include "registrylint/cli.hpp"
#include "registrylint/report.hpp"
#include "registrylint/rules.hpp"
#include "registrylint/synth.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace registrylint;
using testsupport::example_record;
using testsupport::offset;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

struct Verdict {
    bool pass = true;
    std::string note;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            if (pass) {
                note = what;
            }
            pass = false;
        }
    }
};

bool close_rel(double actual, double expected, double rel)
{
    return std::abs(actual - expected) <= rel * std::abs(expected);
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------
// 1. rule fixtures

struct Fixture {
    std::string name;
    UnitRecord record;
    int test = 0;
    bool pass = true;
    std::optional<double> measured;
    double rel = 1e-9;
};

UnitRecord with(Technology t, const std::function<void(UnitRecord&)>& edit)
{
    auto r = example_record(t);
    edit(r);
    return r;
}

Verdict rule_fixtures()
{
    const RuleConfig config;
    using testsupport::rect_region;
    const geo::SpatialIndex districts(
        geo::BoundarySet(geo::BoundaryLevel::District, {rect_region("05774", 51.0, 8.0, 51.5, 8.8)}));
    const geo::SpatialIndex municipalities(
        geo::BoundarySet(geo::BoundaryLevel::Municipality, {rect_region("05774040", 51.0, 8.0, 51.2, 8.3)}));
    const EvaluationContext ctx{config, &districts, &municipalities};
    const auto S = Technology::Solar;
    const auto W = Technology::Wind;
    const double swept82 = std::numbers::pi * 41.0 * 41.0;
    const double swept20 = std::numbers::pi * 10.0 * 10.0;

    std::vector<Fixture> fixtures{
        {"1 complete record", example_record(Technology::Biomass), 1, true, {}},
        {"1 missing municipality id", with(Technology::Biomass, [](auto& r) { r.municipality_id.reset(); }), 1, false, {}},
        {"1 missing status and power", with(W, [](auto& r) { r.operating_status.reset(); r.power_kw.reset(); }), 1, false, {}},
        {"3/4 gross 5 inverter 10 net 5", example_record(S), 3, true, 5.0},
        {"4 gross 5 inverter 10 net 5", example_record(S), 4, true, 10.0},
        {"4 inverter 4 net 5", with(Technology::Storage, [](auto& r) { r.power_inverter_kw = 4.0; }), 4, false, 4.0},
        {"3 gross equals net", with(S, [](auto& r) { r.power_gross_kw = 5.0; }), 3, true, 5.0},
        {"5 example ids", example_record(S), 5, true, {}},
        {"5 four-digit zip", with(S, [](auto& r) { r.zip_code = "1729"; }), 5, false, {}},
        {"5 lowercase prefix", with(S, [](auto& r) { r.unit_id = "see900002935310"; }), 5, false, {}},
        {"6 5 kW on 8 modules", example_record(S), 6, true, 625.0},
        {"6 5 kW on 1 module", with(S, [](auto& r) { r.number_of_modules = 1; }), 6, false, 5000.0},
        {"6 0.35 kW on 1 module",
         with(S, [](auto& r) { r.power_gross_kw = 0.35; r.power_net_kw = 0.35; r.power_inverter_kw = 0.35; r.number_of_modules = 1; }),
         6, true, 350.0},
        {"6 lower bound 50 W", with(S, [](auto& r) { r.power_gross_kw = 0.4; r.number_of_modules = 8; }), 6, true, 50.0},
        {"6 upper bound 700 W", with(S, [](auto& r) { r.power_gross_kw = 5.6; r.number_of_modules = 8; }), 6, true, 700.0},
        {"6 above 700 W", with(S, [](auto& r) { r.power_gross_kw = 5.6; r.number_of_modules = 7; }), 6, false, 800.0},
        {"6 below 50 W", with(S, [](auto& r) { r.power_gross_kw = 0.3; r.power_net_kw = 0.3; r.number_of_modules = 8; }), 6, false, 37.5},
        {"7 ratio 2", example_record(S), 7, true, 2.0},
        {"7 ratio 1000", with(S, [](auto& r) { r.power_inverter_kw = 5000.0; }), 7, false, 1000.0},
        {"7 ratio 1", with(S, [](auto& r) { r.power_inverter_kw = 5.0; }), 7, true, 1.0},
        {"8 1000 kW on 1 ha",
         with(S, [](auto& r) { r.power_gross_kw = 1000.0; r.power_net_kw = 1000.0; r.power_inverter_kw = 1000.0; r.number_of_modules = 2500; r.area_ha = 1.0; }),
         8, true, 1.0},
        {"8 750 kW on 0.01 ha", with(S, [](auto& r) { r.power_gross_kw = 750.0; r.area_ha = 0.01; }), 8, false, 75.0},
        {"8 50 kW on 1 ha", with(S, [](auto& r) { r.power_gross_kw = 50.0; r.area_ha = 1.0; }), 8, true, 0.05},
        {"8 1.5 MW on 1 ha", with(S, [](auto& r) { r.power_gross_kw = 1500.0; r.area_ha = 1.0; }), 8, true, 1.5},
        {"9 2000 kW rotor 82 m", example_record(W), 9, true, 2'000'000.0 / swept82},
        {"9 2000 kW rotor 20 m", with(W, [](auto& r) { r.rotor_diameter_m = 20.0; }), 9, false, 2'000'000.0 / swept20},
        {"9 845 kW rotor 82 m", with(W, [](auto& r) { r.power_kw = 845.0; }), 9, true, 845'000.0 / swept82},
        {"10/11 inside", with(W, [](auto& r) { r.coordinate = LatLon{51.1, 8.15}; }), 10, true, {}},
        {"11 inside", with(W, [](auto& r) { r.coordinate = LatLon{51.1, 8.15}; }), 11, true, {}},
        {"10 1.2 km outside municipality", with(W, [](auto& r) { r.coordinate = offset({51.2, 8.15}, 1200.0, 0.0); }), 10, true, {}},
        {"11 1.2 km outside municipality", with(W, [](auto& r) { r.coordinate = offset({51.2, 8.15}, 1200.0, 0.0); }), 11, true, {}},
        {"10 30 km from district", with(W, [](auto& r) { r.coordinate = offset({51.0, 8.4}, -30'000.0, 0.0); }), 10, false, 30'000.0, 0.005},
        {"12 wind 22 MW", with(W, [](auto& r) { r.power_kw = 22'000.0; }), 12, true, 22.0},
        {"12 wind 25 MW", with(W, [](auto& r) { r.power_kw = 25'000.0; }), 12, false, 25.0},
        {"12 wind 0 MW", with(W, [](auto& r) { r.power_kw = 0.0; }), 12, false, 0.0},
        {"12 solar 0 kW", with(S, [](auto& r) { r.power_net_kw = 0.0; }), 12, false, 0.0},
        {"13 solar 2017", example_record(S), 13, true, 2017.0},
        {"13 storage 1923", with(Technology::Storage, [](auto& r) { r.installation_year = 1923; }), 13, false, 1923.0},
        {"13 hydro 1923", with(Technology::Hydro, [](auto& r) { r.installation_year = 1923; }), 13, true, 1923.0},
        {"13 wind 2031", with(W, [](auto& r) { r.installation_year = 2031; }), 13, false, 2031.0},
        {"14 hub 65 rotor 82", example_record(W), 14, true, 65.0},
        {"14 hub 30 rotor 82", with(W, [](auto& r) { r.hub_height_m = 30.0; }), 14, false, 30.0},
        {"14 hub equals radius", with(W, [](auto& r) { r.hub_height_m = 41.0; }), 14, true, 41.0},
        {"15 balcony 0.6 kW",
         with(S, [](auto& r) { r.unit_type = "Balkonkraftwerk"; r.power_net_kw = 0.6; r.power_gross_kw = 0.6; }), 15, true, 0.6},
        {"15 balcony 1.3 kW",
         with(S, [](auto& r) { r.unit_type = "Balkonkraftwerk"; r.power_net_kw = 1.3; r.power_gross_kw = 1.3; }), 15, false, 1.3},
        {"15 balcony name 6 kW",
         with(S, [](auto& r) { r.unit_name = "Balkonkraftwerk Müller"; r.power_net_kw = 6.0; r.power_gross_kw = 6.0; }), 15, false, 6.0},
    };

    Verdict v;
    for (const auto& f : fixtures) {
        const auto outcome = evaluate_test(f.test, f.record, ctx);
        if (!outcome) {
            v.require(false, f.name + ": not evaluated");
            continue;
        }
        v.require(outcome->passed == f.pass, f.name + ": wrong verdict");
        if (f.measured) {
            v.require(outcome->measured && (*f.measured == 0.0 ? *outcome->measured == 0.0
                                                                : close_rel(*outcome->measured, *f.measured, f.rel)),
                      f.name + ": measured value");
        }
    }
    v.require(close_rel(2'000'000.0 / swept82, 378.7, 1e-4), "378.7 W/m2 arithmetic");
    v.require(close_rel(845'000.0 / swept82, 160.0, 1e-4), "160 W/m2 arithmetic");

    std::vector<UnitRecord> ids(3, example_record(Technology::Solar));
    ids[0].unit_id = "SEE000000000001";
    ids[1].unit_id = "SEE000000000002";
    ids[2].unit_id = "SEE000000000003";
    v.require(check_unique_ids(ids).empty(), "2 unique ids");
    ids[1].unit_id = ids[0].unit_id;
    const auto dupes = check_unique_ids(ids);
    v.require(dupes.size() == 2 && dupes[0].second.unit_id == "SEE000000000001" &&
                  dupes[1].second.unit_id == "SEE000000000001",
              "2 duplicate pair");

    for (auto t : kAllTechnologies) {
        const auto r = example_record(t);
        v.require(run_suite(std::span(&r, 1), EvaluationContext{config}).failures.empty(), "example row of " + std::string(to_string(t)) + " fails");
    }
    v.note = v.pass ? std::to_string(fixtures.size() + 2) + " fixtures" : v.note;
    return v;
}

// ---------------------------------------------------------------------------
// 2. geo oracle

/// Dense sampling refined around the best sample of every segment.
double refined_oracle_m(const LatLon& p, const geo::Region& region)
{
    const auto& ring = region.parts().front().outer;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const auto& a = ring[i];
        const auto& b = ring[i + 1];
        auto at = [&](double t) {
            return testsupport::oracle_distance_m(
                p, {a.lat_deg + t * (b.lat_deg - a.lat_deg), a.lon_deg + t * (b.lon_deg - a.lon_deg)});
        };
        const int n = std::max(1, static_cast<int>(std::ceil(testsupport::oracle_distance_m(a, b) / 5.0)));
        double lo = 0.0;
        double hi = 1.0;
        double step = 1.0 / n;
        int samples = n;
        for (int round = 0; round < 4; ++round) {
            double best_t = lo;
            double best_d = std::numeric_limits<double>::infinity();
            for (int k = 0; k <= samples; ++k) {
                const double t = std::min(hi, lo + k * step);
                const double d = at(t);
                if (d < best_d) {
                    best_d = d;
                    best_t = t;
                }
            }
            best = std::min(best, best_d);
            lo = std::max(0.0, best_t - step);
            hi = std::min(1.0, best_t + step);
            samples = 200;
            step = (hi - lo) / samples;
        }
    }
    return best;
}

Verdict geo_oracle(std::size_t& cases)
{
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> lat(47.5, 54.5);
    std::uniform_real_distribution<double> lon(6.0, 14.5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> far(-30'000.0, 30'000.0);
    std::uniform_real_distribution<double> near(-4'000.0, 4'000.0);
    const double buffer = 1500.0;
    Verdict v;
    double worst_rel = 0.0;
    std::size_t band_skips = 0;
    cases = 0;
    for (int k = 0; k < 1200; ++k) {
        const LatLon c{lat(rng), lon(rng)};
        const auto region = testsupport::random_polygon("R" + std::to_string(k), c, rng);
        LatLon p;
        if (k % 2 == 0) {
            p = offset(c, far(rng), far(rng));
        } else {
            const auto& ring = region.parts().front().outer;
            const auto i = static_cast<std::size_t>(unit(rng) * static_cast<double>(ring.size() - 1));
            const double t = unit(rng);
            const LatLon q{ring[i].lat_deg + t * (ring[i + 1].lat_deg - ring[i].lat_deg),
                           ring[i].lon_deg + t * (ring[i + 1].lon_deg - ring[i].lon_deg)};
            p = offset(q, near(rng), near(rng));
        }
        const bool inside = testsupport::oracle_inside(p, region);
        const double oracle = inside ? 0.0 : refined_oracle_m(p, region);
        const double got = geo::distance_to_boundary(p, region);
        ++cases;
        if (inside) {
            v.require(got == 0.0, "inside point with non-zero distance");
        } else {
            const double rel = std::abs(got - oracle) / oracle;
            worst_rel = std::max(worst_rel, rel);
            v.require(rel <= 0.005, "distance error above 0.5%");
        }
        if (std::abs(oracle - buffer) <= 10.0) {
            ++band_skips;
            continue;
        }
        v.require(geo::contains_with_buffer(p, region, buffer) == (inside || oracle <= buffer), "containment verdict");
    }
    std::ostringstream note;
    note << cases << " cases, worst relative distance error " << std::scientific << std::setprecision(2) << worst_rel
         << ", " << band_skips << " in the +-10 m band";
    if (v.pass) {
        v.note = note.str();
    }
    return v;
}

// ---------------------------------------------------------------------------
// 3. buffer semantics

Verdict buffer_semantics()
{
    const synth::SyntheticGrid grid;
    const geo::SpatialIndex districts(grid.districts());
    const geo::SpatialIndex municipalities(grid.municipalities());
    RuleConfig config;
    config.buffer_m = 1500.0;
    Verdict v;
    std::size_t points = 0;
    for (const auto& cell : grid.cells()) {
        const double mid_lat = (cell.box.min_lat + cell.box.max_lat) / 2.0;
        const double mid_lon = (cell.box.min_lon + cell.box.max_lon) / 2.0;
        struct Side {
            LatLon edge;
            double north;
            double east;
            bool district_edge;
        };
        const Side sides[] = {{{cell.box.max_lat, mid_lon}, 1, 0, cell.north_on_district},
                              {{cell.box.min_lat, mid_lon}, -1, 0, cell.south_on_district},
                              {{mid_lat, cell.box.max_lon}, 0, 1, cell.east_on_district},
                              {{mid_lat, cell.box.min_lon}, 0, -1, cell.west_on_district}};
        for (const auto& side : sides) {
            for (double d : {1400.0, 1600.0}) {
                auto r = example_record(Technology::Wind);
                r.municipality_id = cell.municipality_id;
                r.district_id = cell.district_id;
                r.coordinate = offset(side.edge, side.north * d, side.east * d);
                const auto o = check_location(r, &districts, &municipalities, config);
                ++points;
                const bool expect_pass = d < 1500.0;
                v.require(o[1].passed == expect_pass, "municipality verdict at " + std::to_string(d) + " m");
                if (side.district_edge) {
                    v.require(o[0].passed == expect_pass, "district verdict at " + std::to_string(d) + " m");
                } else {
                    v.require(o[0].passed, "district verdict for interior edge");
                }
            }
        }
    }
    if (v.pass) {
        v.note = std::to_string(points) + " points around " + std::to_string(grid.cells().size()) + " municipalities";
    }
    return v;
}

// ---------------------------------------------------------------------------
// 4. injection round trip

Verdict injection_round_trip()
{
    const synth::SyntheticGrid grid;
    const geo::SpatialIndex districts(grid.districts());
    const geo::SpatialIndex municipalities(grid.municipalities());
    const RuleConfig config;
    const EvaluationContext ctx{config, &districts, &municipalities};
    Verdict v;
    std::size_t expected_pairs = 0;
    std::size_t recalled_pairs = 0;
    std::size_t clean_units = 0;
    std::size_t clean_flagged = 0;
    std::size_t extra_on_injected = 0;
    for (auto t : kAllTechnologies) {
        auto clean = synth::generate_clean(t, 10'000, 20240312, grid);
        const auto injected =
            synth::inject_errors(std::move(clean), synth::ErrorInjectionSpec::uniform_rate(0.05, t), 20240312, config, &grid);
        const auto expected = injected.truth.expected_by_unit();
        const auto result = run_suite(injected.records, ctx);
        std::map<std::string, std::set<int>> seen;
        for (const auto& f : result.failures) {
            for (int id : f.test_ids()) {
                seen[f.unit_id].insert(id);
            }
        }
        for (const auto& [unit, tests] : expected) {
            expected_pairs += tests.size();
            const auto it = seen.find(unit);
            for (int test : tests) {
                if (it != seen.end() && it->second.contains(test)) {
                    ++recalled_pairs;
                }
            }
            if (it != seen.end()) {
                for (int test : it->second) {
                    if (!tests.contains(test)) {
                        ++extra_on_injected;
                    }
                }
            }
        }
        std::set<std::string> units;
        for (const auto& r : injected.records) {
            units.insert(*r.unit_id);
        }
        for (const auto& unit : units) {
            if (!expected.contains(unit)) {
                ++clean_units;
                if (seen.contains(unit)) {
                    ++clean_flagged;
                }
            }
        }
    }
    v.require(recalled_pairs == expected_pairs, "recall below 100%");
    v.require(clean_flagged == 0, "clean units flagged");
    std::ostringstream note;
    note << "recall " << recalled_pairs << "/" << expected_pairs << ", false positives " << clean_flagged << "/"
         << clean_units << " clean units, unexpected tests on injected units " << extra_on_injected;
    v.note = v.pass ? note.str() : v.note + "; " + note.str();
    return v;
}

// ---------------------------------------------------------------------------
// 5. completeness

Verdict completeness_rendering()
{
    Verdict v;
    // Non-null counts out of 100 per table for the unit-owner and coordinate columns of the dataset overview.
    const std::map<Technology, std::pair<int, int>> counts{
        {Technology::Biomass, {97, 96}}, {Technology::Combustion, {95, 26}}, {Technology::Hydro, {99, 55}},
        {Technology::Solar, {100, 5}},   {Technology::Storage, {100, 0}},    {Technology::Wind, {97, 97}},
    };
    UnitTotals totals;
    for (const auto& [t, c] : counts) {
        std::vector<UnitRecord> records(100, example_record(t));
        for (int i = 0; i < 100; ++i) {
            if (i % 100 >= c.first) {
                records[static_cast<std::size_t>(i)].owner_id.reset();
            }
            if ((i * 37) % 100 >= c.second) {
                records[static_cast<std::size_t>(i)].coordinate.reset();
            }
        }
        const auto owner = completeness(records, "owner_id");
        const auto coord = completeness(records, "coordinate");
        v.require(owner.non_null == static_cast<std::uint64_t>(c.first) && owner.fraction == c.first / 100.0,
                  "owner completeness");
        v.require(coord.non_null == static_cast<std::uint64_t>(c.second) && coord.fraction == c.second / 100.0,
                  "coordinate completeness");
        v.require(completeness_percent(owner) == std::to_string(c.first), "owner percent");
        v.require(completeness_percent(coord) == std::to_string(c.second), "coordinate percent");
        totals.add(records);
    }
    // Irregular pattern: every third and every seventh record lacks a hub height.
    std::vector<UnitRecord> wind(1000, example_record(Technology::Wind));
    std::uint64_t hand = 0;
    for (std::size_t i = 0; i < wind.size(); ++i) {
        if (i % 3 == 0 || i % 7 == 0) {
            wind[i].hub_height_m.reset();
        } else {
            ++hand;
        }
    }
    v.require(completeness(wind, "hub_height_m").non_null == hand, "hand-counted hub height");
    v.require(completeness(wind, "hub_height_m").fraction == static_cast<double>(hand) / 1000.0, "hub height fraction");
    v.require(completeness_percent(completeness(wind, "hub_height_m")) == "57", "hub height percent");
    v.require(completeness_percent({998, 1000, 0.998, false}) == "99", "near-complete column shown as 99");

    std::ostringstream table;
    write_completeness_table(table, totals);
    const auto text = table.str();
    v.require(text.find("owner_id") != std::string::npos, "table lists owner_id");
    std::istringstream lines(text);
    std::string line;
    bool modules_row_ok = false;
    while (std::getline(lines, line)) {
        std::istringstream cells(line);
        std::vector<std::string> row{std::istream_iterator<std::string>(cells), std::istream_iterator<std::string>()};
        if (!row.empty() && row[0] == "owner_id") {
            v.require(row == std::vector<std::string>{"owner_id", "97", "95", "99", "100", "100", "97"}, "owner row");
        }
        if (!row.empty() && row[0] == "number_of_modules") {
            modules_row_ok = row == std::vector<std::string>{"number_of_modules", "x", "x", "x", "100", "x", "x"};
        }
    }
    v.require(modules_row_ok, "absent columns rendered as x");
    if (v.pass) {
        v.note = "hand counts and integer-percent rendering match";
    }
    return v;
}

// ---------------------------------------------------------------------------
// 6. histogram

Verdict histogram_counts()
{
    const std::vector<double> km{0.5, 3.0, 4.999, 5.0, 12.0, 59.9, 60.0, 61.0, 250.0};
    std::vector<FailureRecord> failures;
    std::vector<UnitRecord> records;
    for (auto t : {Technology::Wind, Technology::Solar}) {
        for (std::size_t i = 0; i < km.size(); ++i) {
            FailureRecord f;
            f.unit_id = std::string(to_string(t)) + std::to_string(i);
            f.technology = t;
            f.power_kw = 1.0;
            RuleOutcome o;
            o.unit_id = f.unit_id;
            o.test_id = 10;
            o.passed = false;
            o.measured = km[i] * 1000.0;
            o.measured_unit = "m";
            f.outcomes.push_back(o);
            failures.push_back(f);
            records.push_back(example_record(t));
        }
    }
    UnitTotals totals;
    totals.add(records);
    const auto report = build_report(failures, totals);
    Verdict v;
    const auto& wind = report.histograms.at(Technology::Wind);
    std::vector<std::uint64_t> hand(12, 0);
    hand[0] = 3;
    hand[1] = 1;
    hand[2] = 1;
    hand[11] = 1;
    v.require(wind.bins.size() == 13, "wind bin count");
    for (std::size_t i = 0; i < 12 && i < wind.bins.size(); ++i) {
        v.require(wind.bins[i].count == hand[i], "wind bin " + std::to_string(i));
        v.require(wind.bins[i].lower_km == 5.0 * static_cast<double>(i), "wind bin edges");
    }
    v.require(wind.bins.back().overflow && wind.bins.back().count == 3, "wind overflow bin");
    const auto& solar = report.histograms.at(Technology::Solar);
    v.require(solar.bins.size() == 61, "solar bin count");
    v.require(solar.bins.back().count == 0, "solar overflow bin");
    v.require(solar.bins[50].count == 1 && solar.bins[12].count == 2, "solar bins at 250 and 60-65 km");

    std::ostringstream csv;
    write_histogram_csv(csv, wind);
    v.require(csv.str().find("\">=60\",60,,3") != std::string::npos || csv.str().find(">=60,60,,3") != std::string::npos,
              "overflow row in csv");
    if (v.pass) {
        v.note = "wind [0,5)=3 [5,10)=1 [10,15)=1 [55,60)=1 >=60=3; solar overflow at 300 km";
    }
    return v;
}

// ---------------------------------------------------------------------------
// 7. determinism

int quiet_cli(const std::vector<std::string>& args)
{
    std::ostringstream out;
    std::ostringstream err;
    return run_cli(args, out, err);
}

Verdict determinism()
{
    Verdict v;
    const auto data = testsupport::scratch_dir("accept-determinism");
    v.require(quiet_cli({"synth", "--count", "3000", "--seed", "77", "--error-rate", "0.05", "--out", data.string()}) == 0,
              "synth");
    std::vector<fs::path> outs;
    for (const auto* jobs : {"1", "4", "1"}) {
        const auto out = testsupport::scratch_dir(std::string("accept-determinism-run") + std::to_string(outs.size()));
        std::vector<std::string> args{"validate"};
        for (auto t : kAllTechnologies) {
            args.push_back("--input");
            args.push_back(std::string(to_string(t)) + "=" + (data / (std::string(to_string(t)) + ".csv")).string());
        }
        args.insert(args.end(), {"--districts", (data / "districts.geojson").string(), "--municipalities",
                                 (data / "municipalities.geojson").string(), "--out", out.string(), "--jobs", jobs});
        v.require(quiet_cli(args) == 1, "validate exit code");
        outs.push_back(out);
    }
    for (const auto* name : {"failures.csv", "failures.ndjson", "summary.json"}) {
        const auto first = slurp(outs[0] / name);
        v.require(!first.empty(), std::string(name) + " empty");
        for (std::size_t i = 1; i < outs.size(); ++i) {
            v.require(slurp(outs[i] / name) == first, std::string(name) + " differs");
        }
    }
    if (v.pass) {
        v.note = "3 runs (jobs 1, 4, 1) byte-identical";
    }
    return v;
}

// ---------------------------------------------------------------------------
// 8. throughput

double records_per_second(std::span<const UnitRecord> records, const EvaluationContext& ctx)
{
    double best = 0.0;
    for (int round = 0; round < 3; ++round) {
        const auto start = Clock::now();
        const auto result = run_suite(records, ctx, 1);
        const double s = seconds_since(start);
        if (result.records != records.size()) {
            return 0.0;
        }
        best = std::max(best, static_cast<double>(records.size()) / s);
    }
    return best;
}

Verdict throughput()
{
    const synth::SyntheticGrid grid;
    const RuleConfig config;
    std::vector<UnitRecord> records;
    for (auto t : kAllTechnologies) {
        auto clean = synth::generate_clean(t, 40'000, 5, grid);
        auto dirty = synth::inject_errors(std::move(clean), synth::ErrorInjectionSpec::uniform_rate(0.05, t), 5, config, &grid);
        records.insert(records.end(), dirty.records.begin(), dirty.records.end());
    }
    const double plain = records_per_second(records, EvaluationContext{config});

    const geo::SpatialIndex districts(grid.districts());
    const geo::SpatialIndex municipalities(grid.municipalities());
    std::vector<UnitRecord> geo_records;
    for (std::size_t i = 0; i < records.size(); i += 4) {
        geo_records.push_back(records[i]);
    }
    const double with_geo = records_per_second(geo_records, EvaluationContext{config, &districts, &municipalities});

    Verdict v;
    v.require(plain >= 100'000.0, "below 100k records/s without geo");
    v.require(with_geo >= 10'000.0, "below 10k records/s with geo");
    std::ostringstream note;
    note << std::fixed << std::setprecision(0) << plain << " rec/s without geo, " << with_geo << " rec/s with geo over "
         << grid.region_count() << " regions (1 worker)";
    v.note = v.pass ? note.str() : v.note + "; " + note.str();
    return v;
}

// ---------------------------------------------------------------------------
// 9. matrix conformance

Verdict matrix_conformance()
{
    const synth::SyntheticGrid grid;
    const geo::SpatialIndex districts(grid.districts());
    const geo::SpatialIndex municipalities(grid.municipalities());
    const RuleConfig config;
    const EvaluationContext ctx{config, &districts, &municipalities};
    Verdict v;
    SuiteRunner runner(ctx, 2);
    for (auto t : kAllTechnologies) {
        auto clean = synth::generate_clean(t, 2000, 9, grid);
        const auto dirty = synth::inject_errors(std::move(clean), synth::ErrorInjectionSpec::uniform_rate(0.2, t), 9, config, &grid);
        runner.consume(dirty.records);
        for (const auto& r : dirty.records) {
            for (int test = kFirstTest; test <= kLastTest; ++test) {
                if (!test_applies(test, t)) {
                    v.require(!evaluate_test(test, r, ctx).has_value(), "evaluate_test ran an unmarked test");
                }
            }
        }
    }
    const auto result = runner.finish();
    for (int test = kFirstTest; test <= kLastTest; ++test) {
        for (auto t : kAllTechnologies) {
            const auto evaluated = result.tally.evaluated[static_cast<std::size_t>(test)][index_of(t)];
            v.require(test_applies(test, t) == (evaluated > 0), "tally evaluated an unmarked pair");
        }
    }
    for (const auto& f : result.failures) {
        for (int test : f.test_ids()) {
            v.require(test_applies(test, f.technology), "failure for an unmarked pair");
        }
    }
    const auto exercised = result.tally.exercised_pairs().size();
    v.require(exercised == check_mark_count(), "not every check-mark exercised");
    v.require(kTestCount * kAllTechnologies.size() == 90, "test rows x tables");
    std::ostringstream note;
    note << "expanded (test x technology) tally: " << check_mark_count() << " check-marked pairs evaluated, "
         << exercised << " exercised; the stated total of 90 is the 15 test rows x 6 tables";
    v.note = v.pass ? note.str() : v.note + "; " + note.str();
    return v;
}

} // namespace

int main()
{
    struct Criterion {
        int id;
        std::string name;
        double limit_s;
        std::function<Verdict()> run;
    };
    std::size_t geo_cases = 0;
    const std::vector<Criterion> criteria{
        {1, "rule catalog fixtures", 1.0, rule_fixtures},
        {2, "geo oracle equivalence", 30.0, [&] { return geo_oracle(geo_cases); }},
        {3, "buffer semantics 1.4 km / 1.6 km", 0.0, buffer_semantics},
        {4, "injection round trip", 60.0, injection_round_trip},
        {5, "completeness", 0.0, completeness_rendering},
        {6, "distance histogram", 0.0, histogram_counts},
        {7, "determinism", 0.0, determinism},
        {8, "throughput", 0.0, throughput},
        {9, "test matrix conformance", 0.0, matrix_conformance},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = Clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v.pass = false;
            v.note = std::string("exception: ") + e.what();
        }
        const double s = seconds_since(start);
        if (c.limit_s > 0.0 && s >= c.limit_s) {
            v.require(false, "runtime over limit");
        }
        failed += v.pass ? 0 : 1;
        std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << c.id << "  " << c.name << "  (" << std::fixed
                  << std::setprecision(2) << s << " s";
        if (c.limit_s > 0.0) {
            std::cout << ", limit " << std::setprecision(0) << c.limit_s << " s";
        }
        std::cout << ")  " << v.note << '\n';
        std::cout.unsetf(std::ios::fixed);
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << '\n';
    return failed == 0 ? 0 : 1;
}
