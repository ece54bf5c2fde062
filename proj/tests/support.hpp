#pragma once

// Fixtures and independent reference computations shared by the unit tests and the acceptance run.
// The oracles deliberately avoid the library's geometry code.

#include "registrylint/data_model.hpp"
#include "registrylint/geo.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

using registrylint::LatLon;
using registrylint::Technology;
using registrylint::UnitRecord;

inline constexpr double kRadius = 6'371'008.8;

inline double rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Great-circle distance via the angle between unit vectors; independent of the haversine form.
inline double oracle_distance_m(const LatLon& a, const LatLon& b)
{
    const double ax = std::cos(rad(a.lat_deg)) * std::cos(rad(a.lon_deg));
    const double ay = std::cos(rad(a.lat_deg)) * std::sin(rad(a.lon_deg));
    const double az = std::sin(rad(a.lat_deg));
    const double bx = std::cos(rad(b.lat_deg)) * std::cos(rad(b.lon_deg));
    const double by = std::cos(rad(b.lat_deg)) * std::sin(rad(b.lon_deg));
    const double bz = std::sin(rad(b.lat_deg));
    const double cx = ay * bz - az * by;
    const double cy = az * bx - ax * bz;
    const double cz = ax * by - ay * bx;
    const double cross = std::sqrt(cx * cx + cy * cy + cz * cz);
    const double dot = ax * bx + ay * by + az * bz;
    return kRadius * std::atan2(cross, dot);
}

/// Point `north_m` / `east_m` away from `origin` on the sphere (small offsets).
inline LatLon offset(const LatLon& origin, double north_m, double east_m)
{
    const double lat = origin.lat_deg + north_m / kRadius * 180.0 / std::numbers::pi;
    const double lon = origin.lon_deg + east_m / (kRadius * std::cos(rad(origin.lat_deg))) * 180.0 / std::numbers::pi;
    return {lat, lon};
}

/// Closed axis-aligned rectangle in degrees.
inline registrylint::geo::Ring rect(double lat0, double lon0, double lat1, double lon1)
{
    return {{lat0, lon0}, {lat0, lon1}, {lat1, lon1}, {lat1, lon0}, {lat0, lon0}};
}

inline registrylint::geo::Region rect_region(const std::string& id, double lat0, double lon0, double lat1, double lon1)
{
    return registrylint::geo::Region(id, id, {registrylint::geo::Polygon{rect(lat0, lon0, lat1, lon1), {}}});
}

/// Dense sampling of every ring at about `step_m` spacing; minimum great-circle distance.
inline double oracle_ring_distance_m(const LatLon& p, const registrylint::geo::Region& region, double step_m = 2.0)
{
    double best = std::numeric_limits<double>::infinity();
    auto scan = [&](const registrylint::geo::Ring& ring) {
        for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
            const auto& a = ring[i];
            const auto& b = ring[i + 1];
            const double len = oracle_distance_m(a, b);
            const int n = std::max(1, static_cast<int>(std::ceil(len / step_m)));
            for (int k = 0; k <= n; ++k) {
                const double t = static_cast<double>(k) / n;
                const LatLon q{a.lat_deg + t * (b.lat_deg - a.lat_deg), a.lon_deg + t * (b.lon_deg - a.lon_deg)};
                best = std::min(best, oracle_distance_m(p, q));
            }
        }
    };
    for (const auto& part : region.parts()) {
        scan(part.outer);
        for (const auto& hole : part.holes) {
            scan(hole);
        }
    }
    return best;
}

/// Even-odd crossing count in the lat/lon plane.
inline bool oracle_in_ring(const LatLon& p, const registrylint::geo::Ring& ring)
{
    bool inside = false;
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
        const auto& a = ring[i];
        const auto& b = ring[j];
        if ((a.lat_deg > p.lat_deg) != (b.lat_deg > p.lat_deg)) {
            const double lon = a.lon_deg + (p.lat_deg - a.lat_deg) / (b.lat_deg - a.lat_deg) * (b.lon_deg - a.lon_deg);
            if (p.lon_deg < lon) {
                inside = !inside;
            }
        }
    }
    return inside;
}

inline bool oracle_inside(const LatLon& p, const registrylint::geo::Region& region)
{
    for (const auto& part : region.parts()) {
        if (!oracle_in_ring(p, part.outer)) {
            continue;
        }
        const bool in_hole = std::any_of(part.holes.begin(), part.holes.end(),
                                         [&](const auto& h) { return oracle_in_ring(p, h); });
        if (!in_hole) {
            return true;
        }
    }
    return false;
}

/// Star-shaped random polygon around `center` with radii in [r_min, r_max] meters.
inline registrylint::geo::Region random_polygon(const std::string& id, const LatLon& center, std::mt19937_64& rng,
                                                double r_min = 2000.0, double r_max = 12000.0)
{
    std::uniform_int_distribution<int> vertices(3, 12);
    std::uniform_real_distribution<double> radius(r_min, r_max);
    const int n = vertices(rng);
    registrylint::geo::Ring ring;
    for (int k = 0; k < n; ++k) {
        const double angle = 2.0 * std::numbers::pi * k / n;
        const double r = radius(rng);
        ring.push_back(offset(center, r * std::sin(angle), r * std::cos(angle)));
    }
    ring.push_back(ring.front());
    return registrylint::geo::Region(id, id, {registrylint::geo::Polygon{ring, {}}});
}

/// Appendix-style example row of each registry table, completed with consistent values.
inline UnitRecord example_record(Technology t)
{
    UnitRecord r;
    r.technology = t;
    r.unit_id = "SEE900002935310";
    r.owner_id = "ABR989393706204";
    r.operating_status = "In Betrieb";
    r.grid_operator_inspection = true;
    r.commissioning_date = std::chrono::year{2001} / 12 / 21;
    r.planned_commissioning_date = std::chrono::year{2024} / 12 / 31;
    r.installation_year = 2017;
    r.download_date = std::chrono::year{2024} / 3 / 12;
    r.zip_code = "17291";
    r.municipality = "Bad Wünnenberg";
    r.municipality_id = "05774040";
    r.district = "Nordfriesland";
    r.district_id = "05774";
    r.coordinate = LatLon{48.1748, 11.5961};
    switch (t) {
    case Technology::Solar:
        r.power_gross_kw = 5.0;
        r.power_inverter_kw = 10.0;
        r.power_net_kw = 5.0;
        r.combination_with_storage = "Kein Stromspeicher";
        r.number_of_modules = 8;
        r.orientation = "Süd";
        r.orientation_secondary = "West";
        r.unit_type = "Freifläche";
        break;
    case Technology::Storage:
        r.power_gross_kw = 5.0;
        r.power_inverter_kw = 10.0;
        r.power_net_kw = 5.0;
        r.storage_capacity_kwh = 10.0;
        r.battery_technology = "Lithium-Batterie";
        break;
    case Technology::Wind:
        r.power_kw = 2000.0;
        r.wind_technology = "Horizontalläufer";
        r.type_description = "E-70 E4";
        r.manufacturer = "ENERCON GmbH";
        r.position = "Windkraft an Land";
        r.hub_height_m = 65.0;
        r.rotor_diameter_m = 82.0;
        break;
    case Technology::Biomass:
        r.power_kw = 2000.0;
        r.combustion_technology = "Verbrennungsmotor";
        r.fuel_type = "Gasförmige Biomasse";
        break;
    case Technology::Combustion:
        r.power_kw = 2000.0;
        r.energy_carrier = "Erdgas";
        break;
    case Technology::Hydro:
        r.power_kw = 2000.0;
        r.type_of_inflow = "Flusskraftwerk";
        r.plant_type = "Laufwasseranlage";
        break;
    }
    return r;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("registrylint-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace testsupport
