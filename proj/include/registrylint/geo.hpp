#pragma once

#include "registrylint/data_model.hpp"

#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace registrylint::geo {

/// Mean earth radius of the spherical model used for all distances.
inline constexpr double kEarthRadiusM = 6'371'008.8;

class GeoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

double haversine_m(const LatLon& a, const LatLon& b);

struct BoundingBox {
    double min_lat = 0.0;
    double min_lon = 0.0;
    double max_lat = 0.0;
    double max_lon = 0.0;

    bool contains(const LatLon& p) const
    {
        return p.lat_deg >= min_lat && p.lat_deg <= max_lat && p.lon_deg >= min_lon && p.lon_deg <= max_lon;
    }
    bool intersects(const BoundingBox& o) const
    {
        return min_lat <= o.max_lat && o.min_lat <= max_lat && min_lon <= o.max_lon && o.min_lon <= max_lon;
    }
};

/// Box guaranteed to contain every point within `radius_m` of `center`.
BoundingBox box_around(const LatLon& center, double radius_m);

/// Closed ring: first vertex equals last vertex.
using Ring = std::vector<LatLon>;

struct Polygon {
    Ring outer;
    std::vector<Ring> holes;
};

/// Administrative region: one or more polygons (islands, exclaves) sharing a region key.
class Region {
public:
    /// Throws GeoError naming `id` when a ring is not closed, has fewer than 4 vertices,
    /// or the outer rings enclose zero area.
    Region(std::string id, std::string name, std::vector<Polygon> parts);

    const std::string& id() const { return id_; }
    const std::string& name() const { return name_; }
    const std::vector<Polygon>& parts() const { return parts_; }
    const BoundingBox& bbox() const { return bbox_; }
    std::size_t ring_count() const;

private:
    std::string id_;
    std::string name_;
    std::vector<Polygon> parts_;
    BoundingBox bbox_;
};

enum class BoundaryLevel : std::uint8_t { District, Municipality };

std::string_view to_string(BoundaryLevel level);

/// Regions of one administrative level, unique by id.
class BoundarySet {
public:
    BoundarySet() = default;
    BoundarySet(BoundaryLevel level, std::vector<Region> regions);

    BoundaryLevel level() const { return level_; }
    const std::vector<Region>& regions() const { return regions_; }
    std::size_t size() const { return regions_.size(); }

    /// nullptr for unknown ids.
    const Region* find(std::string_view id) const;

private:
    BoundaryLevel level_ = BoundaryLevel::District;
    std::vector<Region> regions_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Ray casting with holes honored; points on an edge count as inside.
bool point_in_region(const LatLon& p, const Region& region);

/// Minimum geodesic distance from `p` to any ring of the region, ignoring containment.
double distance_to_rings_m(const LatLon& p, const Region& region);

/// 0 inside the region, otherwise the minimum distance to its rings in meters.
double distance_to_boundary(const LatLon& p, const Region& region);

/// Inside the region, or within `buffer_m` of its boundary.
bool contains_with_buffer(const LatLon& p, const Region& region, double buffer_m);

/// Bounding-box tree over a BoundarySet. Immutable after construction and safe for concurrent queries.
class SpatialIndex {
public:
    explicit SpatialIndex(BoundarySet boundaries);
    ~SpatialIndex();
    SpatialIndex(SpatialIndex&&) noexcept;
    SpatialIndex& operator=(SpatialIndex&&) noexcept;

    const BoundarySet& boundaries() const { return boundaries_; }

    /// Indices into boundaries().regions() whose bounding box lies within `buffer_m` of `p`,
    /// ascending. A superset of the regions that could contain p after buffering.
    std::vector<std::size_t> candidates(const LatLon& p, double buffer_m) const;

private:
    struct Tree;
    BoundarySet boundaries_;
    std::unique_ptr<Tree> tree_;
};

/// Sorted ids of every region that contains `p` with the given buffer.
std::vector<std::string> locate(const LatLon& p, const SpatialIndex& index, double buffer_m);

/// Same result as locate() computed by scanning every region.
std::vector<std::string> locate_exhaustive(const LatLon& p, const BoundarySet& boundaries, double buffer_m);

} // namespace registrylint::geo
