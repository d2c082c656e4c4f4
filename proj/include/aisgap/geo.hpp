#pragma once

// Spherical geometry and nearest-port lookup.

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace aisgap::geo {

inline constexpr double kEarthRadiusM = 6'371'000.0;

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;
};

/// Great-circle distance on a sphere of radius kEarthRadiusM.
double haversine_m(const GeoPoint& a, const GeoPoint& b);

struct Displacement {
    double dv = 0.0;  // signed meridional meters, north positive
    double dh = 0.0;  // signed zonal meters along prev's latitude, east positive
};

/// Splits the move prev -> cur into north and east components. The east
/// component takes the shorter way around the antimeridian.
Displacement delta_components(const GeoPoint& prev, const GeoPoint& cur);

/// Longitude difference b - a wrapped into [-180, 180).
double wrap_lon_delta(double a, double b);

struct Port {
    std::string label;
    GeoPoint pos;
};

/// Reads a CSV with a header naming at least "lat" and "lon" columns (and
/// optionally "label"); other columns are ignored. Quoted fields are supported.
std::vector<Port> load_ports_csv(const std::string& path);

/// Immutable uniform lat/lon grid over port positions.
class PortIndex {
public:
    explicit PortIndex(std::span<const Port> ports, double cell_size_deg = 1.0);
    explicit PortIndex(std::span<const GeoPoint> ports, double cell_size_deg = 1.0);

    /// Exact distance to the nearest port. Searches rings of cells outward
    /// until no unvisited cell can hold a closer port. Throws
    /// EmptyPortDatabase when built from an empty list.
    double nearest_distance_m(const GeoPoint& p) const;

    /// Batch query, parallel over points.
    std::vector<double> nearest_distances_m(std::span<const GeoPoint> points) const;

    std::size_t size() const { return points_.size(); }
    double cell_size_deg() const { return cell_; }
    std::size_t cell_count() const { return ranges_.size(); }
    /// Number of stored ports falling in the cell that contains p.
    std::size_t cell_population(const GeoPoint& p) const;

private:
    void build(std::vector<GeoPoint> pts);
    int lat_band(double lat) const;
    int lon_band(double lon) const;
    std::int64_t key(int lat_band, int lon_band) const;

    double cell_;
    double lat_step_ = 1.0;
    double lon_step_ = 1.0;
    int lat_bands_ = 0;
    int lon_bands_ = 0;
    std::vector<GeoPoint> points_;  // sorted by cell key
    std::unordered_map<std::int64_t, std::pair<std::uint32_t, std::uint32_t>> ranges_;
};

namespace reference {
/// Linear scan over every port.
double nearest_distance_m(std::span<const GeoPoint> ports, const GeoPoint& p);
std::vector<double> nearest_distances_m(std::span<const GeoPoint> ports,
                                        std::span<const GeoPoint> points);
}  // namespace reference

}  // namespace aisgap::geo
