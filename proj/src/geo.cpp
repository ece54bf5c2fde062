#include "registrylint/geo.hpp"

#include <boost/geometry/geometries/box.hpp>
#include <boost/geometry/geometries/point.hpp>
#include <boost/geometry/index/rtree.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace registrylint::geo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kMetersPerDegree = kEarthRadiusM * kDegToRad;
// Segments longer than this are split before the local projection is applied.
constexpr double kMaxProjectedSegmentM = 100'000.0;

double wrap_lon_delta(double d)
{
    while (d > 180.0) {
        d -= 360.0;
    }
    while (d < -180.0) {
        d += 360.0;
    }
    return d;
}

enum class RingSide { Outside, Inside, OnEdge };

bool on_segment(const LatLon& p, const LatLon& a, const LatLon& b)
{
    constexpr double eps = 1e-12;
    const double cross = (b.lon_deg - a.lon_deg) * (p.lat_deg - a.lat_deg) - (b.lat_deg - a.lat_deg) * (p.lon_deg - a.lon_deg);
    if (std::abs(cross) > eps) {
        return false;
    }
    return p.lat_deg >= std::min(a.lat_deg, b.lat_deg) - eps && p.lat_deg <= std::max(a.lat_deg, b.lat_deg) + eps &&
           p.lon_deg >= std::min(a.lon_deg, b.lon_deg) - eps && p.lon_deg <= std::max(a.lon_deg, b.lon_deg) + eps;
}

RingSide ring_side(const LatLon& p, const Ring& ring)
{
    bool inside = false;
    for (std::size_t i = 1; i < ring.size(); ++i) {
        const LatLon& a = ring[i - 1];
        const LatLon& b = ring[i];
        if (on_segment(p, a, b)) {
            return RingSide::OnEdge;
        }
        if ((a.lat_deg > p.lat_deg) != (b.lat_deg > p.lat_deg)) {
            const double x = a.lon_deg + (p.lat_deg - a.lat_deg) * (b.lon_deg - a.lon_deg) / (b.lat_deg - a.lat_deg);
            if (p.lon_deg < x) {
                inside = !inside;
            }
        }
    }
    return inside ? RingSide::Inside : RingSide::Outside;
}

double shoelace_deg2(const Ring& ring)
{
    double sum = 0.0;
    for (std::size_t i = 1; i < ring.size(); ++i) {
        sum += ring[i - 1].lon_deg * ring[i].lat_deg - ring[i].lon_deg * ring[i - 1].lat_deg;
    }
    return 0.5 * sum;
}

void check_ring(const Ring& ring, const std::string& id)
{
    if (ring.size() < 4) {
        throw GeoError("region " + id + ": ring has fewer than 4 vertices");
    }
    if (!(ring.front() == ring.back())) {
        throw GeoError("region " + id + ": ring is not closed");
    }
}

/// Equirectangular frame centered on the query point.
struct LocalFrame {
    LatLon origin;
    double kx;

    explicit LocalFrame(const LatLon& o)
    : origin(o)
    , kx(std::cos(o.lat_deg * kDegToRad) * kMetersPerDegree)
    {
    }

    double x(const LatLon& q) const { return wrap_lon_delta(q.lon_deg - origin.lon_deg) * kx; }
    double y(const LatLon& q) const { return (q.lat_deg - origin.lat_deg) * kMetersPerDegree; }
};

struct PlanarHit {
    double distance;
    double t;
};

PlanarHit planar_point_segment(double ax, double ay, double bx, double by)
{
    const double dx = bx - ax;
    const double dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0.0) {
        t = std::clamp(-(ax * dx + ay * dy) / len2, 0.0, 1.0);
    }
    const double nx = ax + t * dx;
    const double ny = ay + t * dy;
    return {std::hypot(nx, ny), t};
}

LatLon lerp(const LatLon& a, const LatLon& b, double t)
{
    return {a.lat_deg + t * (b.lat_deg - a.lat_deg), a.lon_deg + t * wrap_lon_delta(b.lon_deg - a.lon_deg)};
}

/// Geodesic distance from p to the segment a-b (linear in lat/lon). The nearest parameter is found
/// in an equirectangular frame at the mean latitude of p and the segment, then measured with haversine.
double segment_distance_m(const LatLon& p, const LatLon& a, const LatLon& b)
{
    const double mean_lat = 0.5 * (p.lat_deg + 0.5 * (a.lat_deg + b.lat_deg));
    const double kx = std::cos(mean_lat * kDegToRad) * kMetersPerDegree;
    const double ax = wrap_lon_delta(a.lon_deg - p.lon_deg) * kx;
    const double ay = (a.lat_deg - p.lat_deg) * kMetersPerDegree;
    const double bx = wrap_lon_delta(b.lon_deg - p.lon_deg) * kx;
    const double by = (b.lat_deg - p.lat_deg) * kMetersPerDegree;
    const auto hit = planar_point_segment(ax, ay, bx, by);
    return haversine_m(p, lerp(a, b, hit.t));
}

/// Calls fn(a, b) for every boundary segment, splitting segments longer than kMaxProjectedSegmentM.
template <typename Fn>
void for_each_segment(const Region& region, Fn&& fn)
{
    auto visit_ring = [&](const Ring& ring) {
        for (std::size_t i = 1; i < ring.size(); ++i) {
            const LatLon& a = ring[i - 1];
            const LatLon& b = ring[i];
            const double mid_cos = std::cos(0.5 * (a.lat_deg + b.lat_deg) * kDegToRad);
            const double approx_len = std::hypot((b.lat_deg - a.lat_deg) * kMetersPerDegree,
                                                 wrap_lon_delta(b.lon_deg - a.lon_deg) * kMetersPerDegree * mid_cos);
            if (approx_len <= kMaxProjectedSegmentM) {
                fn(a, b);
                continue;
            }
            const auto pieces = static_cast<int>(std::ceil(approx_len / kMaxProjectedSegmentM));
            LatLon prev = a;
            for (int k = 1; k <= pieces; ++k) {
                const LatLon next = (k == pieces) ? b : lerp(a, b, static_cast<double>(k) / pieces);
                fn(prev, next);
                prev = next;
            }
        }
    };
    for (const auto& part : region.parts()) {
        visit_ring(part.outer);
        for (const auto& hole : part.holes) {
            visit_ring(hole);
        }
    }
}

} // namespace

double haversine_m(const LatLon& a, const LatLon& b)
{
    const double phi1 = a.lat_deg * kDegToRad;
    const double phi2 = b.lat_deg * kDegToRad;
    const double dphi = phi2 - phi1;
    const double dlambda = wrap_lon_delta(b.lon_deg - a.lon_deg) * kDegToRad;
    const double s1 = std::sin(0.5 * dphi);
    const double s2 = std::sin(0.5 * dlambda);
    const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

BoundingBox box_around(const LatLon& center, double radius_m)
{
    const double dlat = radius_m / kMetersPerDegree * 1.01 + 1e-9;
    BoundingBox box;
    box.min_lat = std::max(-90.0, center.lat_deg - dlat);
    box.max_lat = std::min(90.0, center.lat_deg + dlat);
    const double extreme_lat = std::max(std::abs(box.min_lat), std::abs(box.max_lat));
    const double c = std::cos(extreme_lat * kDegToRad);
    const double dlon = c > 1e-6 ? dlat / c * 1.01 : 360.0;
    if (dlon >= 180.0 || center.lon_deg - dlon < -180.0 || center.lon_deg + dlon > 180.0) {
        box.min_lon = -180.0;
        box.max_lon = 180.0;
    } else {
        box.min_lon = center.lon_deg - dlon;
        box.max_lon = center.lon_deg + dlon;
    }
    return box;
}

Region::Region(std::string id, std::string name, std::vector<Polygon> parts)
: id_(std::move(id))
, name_(std::move(name))
, parts_(std::move(parts))
{
    if (parts_.empty()) {
        throw GeoError("region " + id_ + ": no polygons");
    }
    double area = 0.0;
    bbox_ = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& part : parts_) {
        check_ring(part.outer, id_);
        for (const auto& hole : part.holes) {
            check_ring(hole, id_);
        }
        area += std::abs(shoelace_deg2(part.outer));
        for (const auto& v : part.outer) {
            bbox_.min_lat = std::min(bbox_.min_lat, v.lat_deg);
            bbox_.max_lat = std::max(bbox_.max_lat, v.lat_deg);
            bbox_.min_lon = std::min(bbox_.min_lon, v.lon_deg);
            bbox_.max_lon = std::max(bbox_.max_lon, v.lon_deg);
        }
    }
    if (!(area > 0.0)) {
        throw GeoError("region " + id_ + ": degenerate polygon with zero area");
    }
}

std::size_t Region::ring_count() const
{
    std::size_t n = 0;
    for (const auto& part : parts_) {
        n += 1 + part.holes.size();
    }
    return n;
}

std::string_view to_string(BoundaryLevel level)
{
    return level == BoundaryLevel::District ? "district" : "municipality";
}

BoundarySet::BoundarySet(BoundaryLevel level, std::vector<Region> regions)
: level_(level)
, regions_(std::move(regions))
{
    by_id_.reserve(regions_.size());
    for (std::size_t i = 0; i < regions_.size(); ++i) {
        if (!by_id_.emplace(regions_[i].id(), i).second) {
            throw GeoError("duplicate " + std::string(to_string(level_)) + " region id " + regions_[i].id());
        }
    }
}

const Region* BoundarySet::find(std::string_view id) const
{
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &regions_[it->second];
}

bool point_in_region(const LatLon& p, const Region& region)
{
    if (!region.bbox().contains(p)) {
        return false;
    }
    for (const auto& part : region.parts()) {
        const auto side = ring_side(p, part.outer);
        if (side == RingSide::OnEdge) {
            return true;
        }
        if (side == RingSide::Outside) {
            continue;
        }
        bool in_hole = false;
        for (const auto& hole : part.holes) {
            const auto hs = ring_side(p, hole);
            if (hs == RingSide::OnEdge) {
                return true;
            }
            if (hs == RingSide::Inside) {
                in_hole = true;
                break;
            }
        }
        if (!in_hole) {
            return true;
        }
    }
    return false;
}

double distance_to_rings_m(const LatLon& p, const Region& region)
{
    // Pass 1 ranks segments by planar distance in a frame centered on p; pass 2 measures the
    // plausible winners geodesically. The slack covers the frame's scale error far from p.
    const LocalFrame frame(p);
    double best_planar = std::numeric_limits<double>::infinity();
    for_each_segment(region, [&](const LatLon& a, const LatLon& b) {
        const auto hit = planar_point_segment(frame.x(a), frame.y(a), frame.x(b), frame.y(b));
        best_planar = std::min(best_planar, hit.distance);
    });
    const double slack = best_planar * (1.02 + 4.0 * best_planar / kEarthRadiusM) + 1.0;
    double best = std::numeric_limits<double>::infinity();
    for_each_segment(region, [&](const LatLon& a, const LatLon& b) {
        const auto hit = planar_point_segment(frame.x(a), frame.y(a), frame.x(b), frame.y(b));
        if (hit.distance <= slack) {
            best = std::min(best, segment_distance_m(p, a, b));
        }
    });
    return best;
}

double distance_to_boundary(const LatLon& p, const Region& region)
{
    if (point_in_region(p, region)) {
        return 0.0;
    }
    return distance_to_rings_m(p, region);
}

bool contains_with_buffer(const LatLon& p, const Region& region, double buffer_m)
{
    if (!(buffer_m >= 0.0) || !std::isfinite(buffer_m)) {
        throw std::invalid_argument("buffer must be a non-negative finite distance");
    }
    if (!region.bbox().intersects(box_around(p, buffer_m))) {
        return false;
    }
    if (point_in_region(p, region)) {
        return true;
    }
    if (buffer_m == 0.0) {
        return false;
    }
    const LocalFrame frame(p);
    const double screen = buffer_m * 1.5 + 100.0;
    bool hit_found = false;
    for_each_segment(region, [&](const LatLon& a, const LatLon& b) {
        if (hit_found) {
            return;
        }
        const auto hit = planar_point_segment(frame.x(a), frame.y(a), frame.x(b), frame.y(b));
        if (hit.distance <= screen && segment_distance_m(p, a, b) <= buffer_m) {
            hit_found = true;
        }
    });
    return hit_found;
}

// ---------------------------------------------------------------------------

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

struct SpatialIndex::Tree {
    using Point = bg::model::point<double, 2, bg::cs::cartesian>;
    using Box = bg::model::box<Point>;
    using Value = std::pair<Box, std::size_t>;

    bgi::rtree<Value, bgi::rstar<16>> rtree;

    static Box to_box(const BoundingBox& b) { return Box(Point(b.min_lon, b.min_lat), Point(b.max_lon, b.max_lat)); }
};

SpatialIndex::SpatialIndex(BoundarySet boundaries)
: boundaries_(std::move(boundaries))
{
    std::vector<Tree::Value> values;
    values.reserve(boundaries_.size());
    for (std::size_t i = 0; i < boundaries_.size(); ++i) {
        values.emplace_back(Tree::to_box(boundaries_.regions()[i].bbox()), i);
    }
    tree_ = std::make_unique<Tree>(Tree{bgi::rtree<Tree::Value, bgi::rstar<16>>(values.begin(), values.end())});
}

SpatialIndex::~SpatialIndex() = default;
SpatialIndex::SpatialIndex(SpatialIndex&&) noexcept = default;
SpatialIndex& SpatialIndex::operator=(SpatialIndex&&) noexcept = default;

std::vector<std::size_t> SpatialIndex::candidates(const LatLon& p, double buffer_m) const
{
    std::vector<Tree::Value> hits;
    tree_->rtree.query(bgi::intersects(Tree::to_box(box_around(p, buffer_m))), std::back_inserter(hits));
    std::vector<std::size_t> out;
    out.reserve(hits.size());
    for (const auto& h : hits) {
        out.push_back(h.second);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> locate(const LatLon& p, const SpatialIndex& index, double buffer_m)
{
    std::vector<std::string> ids;
    for (auto i : index.candidates(p, buffer_m)) {
        const auto& region = index.boundaries().regions()[i];
        if (contains_with_buffer(p, region, buffer_m)) {
            ids.push_back(region.id());
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<std::string> locate_exhaustive(const LatLon& p, const BoundarySet& boundaries, double buffer_m)
{
    std::vector<std::string> ids;
    for (const auto& region : boundaries.regions()) {
        if (contains_with_buffer(p, region, buffer_m)) {
            ids.push_back(region.id());
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

} // namespace registrylint::geo
