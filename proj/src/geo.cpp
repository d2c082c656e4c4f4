#include "aisgap/geo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "aisgap/error.hpp"

namespace aisgap::geo {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double hav(double angle_rad) {
    const double s = std::sin(angle_rad / 2.0);
    return s * s;
}

double normalize_lon(double lon) {
    if (lon >= -180.0 && lon < 180.0) return lon;
    double x = std::fmod(lon + 180.0, 360.0);
    if (x < 0) x += 360.0;
    return x - 180.0;
}

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    while (!s.empty() && s.back() == ' ') s.pop_back();
    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
    return s;
}

}  // namespace

double haversine_m(const GeoPoint& a, const GeoPoint& b) {
    const double phi1 = a.lat * kDeg;
    const double phi2 = b.lat * kDeg;
    const double h = hav(phi2 - phi1) + std::cos(phi1) * std::cos(phi2) * hav((b.lon - a.lon) * kDeg);
    return 2.0 * kEarthRadiusM * std::asin(std::sqrt(std::clamp(h, 0.0, 1.0)));
}

double wrap_lon_delta(double a, double b) {
    double d = std::fmod(b - a + 180.0, 360.0);
    if (d < 0) d += 360.0;
    return d - 180.0;
}

Displacement delta_components(const GeoPoint& prev, const GeoPoint& cur) {
    Displacement out;
    const double dv = haversine_m(prev, GeoPoint{cur.lat, prev.lon});
    out.dv = cur.lat >= prev.lat ? dv : -dv;
    const double dlon = wrap_lon_delta(prev.lon, cur.lon);
    const double dh = haversine_m(GeoPoint{prev.lat, 0.0}, GeoPoint{prev.lat, std::abs(dlon)});
    out.dh = dlon >= 0 ? dh : -dh;
    return out;
}

std::vector<Port> load_ports_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot open ports file " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error(Errc::EmptyPortDatabase, path + " is empty");
    const auto header = split_csv_row(line);
    int lat_col = -1, lon_col = -1, label_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string h = lower(header[i]);
        if (h == "lat" || h == "latitude") lat_col = static_cast<int>(i);
        if (h == "lon" || h == "lng" || h == "longitude") lon_col = static_cast<int>(i);
        if (h == "label" || h == "name") label_col = static_cast<int>(i);
    }
    if (lat_col < 0 || lon_col < 0)
        throw Error(Errc::Io, path + ": header needs lat and lon columns");
    std::vector<Port> ports;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto row = split_csv_row(line);
        const auto need = static_cast<std::size_t>(std::max({lat_col, lon_col, label_col}));
        if (row.size() <= need)
            throw Error(Errc::Io, path + ":" + std::to_string(line_no) + ": too few columns");
        Port p;
        try {
            p.pos.lat = std::stod(row[static_cast<std::size_t>(lat_col)]);
            p.pos.lon = std::stod(row[static_cast<std::size_t>(lon_col)]);
        } catch (const std::exception&) {
            throw Error(Errc::Io, path + ":" + std::to_string(line_no) + ": bad coordinate");
        }
        if (!(p.pos.lat >= -90.0 && p.pos.lat <= 90.0) || !std::isfinite(p.pos.lon))
            throw Error(Errc::FieldOutOfRange,
                        path + ":" + std::to_string(line_no) + ": coordinate out of range");
        p.pos.lon = normalize_lon(p.pos.lon);
        if (label_col >= 0) p.label = row[static_cast<std::size_t>(label_col)];
        ports.push_back(std::move(p));
    }
    return ports;
}

PortIndex::PortIndex(std::span<const Port> ports, double cell_size_deg) : cell_(cell_size_deg) {
    std::vector<GeoPoint> pts;
    pts.reserve(ports.size());
    for (const auto& p : ports) pts.push_back(p.pos);
    build(std::move(pts));
}

PortIndex::PortIndex(std::span<const GeoPoint> ports, double cell_size_deg)
    : cell_(cell_size_deg) {
    build(std::vector<GeoPoint>(ports.begin(), ports.end()));
}

void PortIndex::build(std::vector<GeoPoint> pts) {
    if (!(cell_ > 0.0 && cell_ <= 180.0))
        throw Error(Errc::InvalidConfig, "port grid cell size must be in (0, 180]");
    lat_bands_ = static_cast<int>(std::ceil(180.0 / cell_));
    lon_bands_ = static_cast<int>(std::ceil(360.0 / cell_));
    // Exact band widths, so wrapped bands line up with the unwrapped edges.
    lat_step_ = 180.0 / lat_bands_;
    lon_step_ = 360.0 / lon_bands_;
    for (auto& p : pts) p.lon = normalize_lon(p.lon);
    std::vector<std::pair<std::int64_t, GeoPoint>> keyed;
    keyed.reserve(pts.size());
    for (const auto& p : pts) keyed.emplace_back(key(lat_band(p.lat), lon_band(p.lon)), p);
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    points_.clear();
    points_.reserve(keyed.size());
    for (std::size_t i = 0; i < keyed.size(); ++i) {
        auto [it, fresh] = ranges_.try_emplace(keyed[i].first, static_cast<std::uint32_t>(i),
                                               static_cast<std::uint32_t>(i));
        it->second.second = static_cast<std::uint32_t>(i + 1);
        points_.push_back(keyed[i].second);
    }
}

int PortIndex::lat_band(double lat) const {
    const int b = static_cast<int>(std::floor((lat + 90.0) / lat_step_));
    return std::clamp(b, 0, lat_bands_ - 1);
}

int PortIndex::lon_band(double lon) const {
    const int b = static_cast<int>(std::floor((normalize_lon(lon) + 180.0) / lon_step_));
    return std::clamp(b, 0, lon_bands_ - 1);
}

std::int64_t PortIndex::key(int lat_band, int lon_band) const {
    return static_cast<std::int64_t>(lat_band) * lon_bands_ + lon_band;
}

std::size_t PortIndex::cell_population(const GeoPoint& p) const {
    const auto it = ranges_.find(key(lat_band(p.lat), lon_band(p.lon)));
    return it == ranges_.end() ? 0 : it->second.second - it->second.first;
}

double PortIndex::nearest_distance_m(const GeoPoint& p) const {
    if (points_.empty()) throw Error(Errc::EmptyPortDatabase, "port index is empty");
    const int b = lat_band(p.lat);
    const int c = lon_band(p.lon);
    const double lon = normalize_lon(p.lon);
    const double cos_phi = std::cos(p.lat * kDeg);
    double best = std::numeric_limits<double>::infinity();

    auto visit = [&](int lb, int ob) {
        const auto it = ranges_.find(key(lb, ob));
        if (it == ranges_.end()) return;
        for (std::uint32_t i = it->second.first; i < it->second.second; ++i)
            best = std::min(best, haversine_m(p, points_[i]));
    };
    auto wrap = [&](int ob) { return ((ob % lon_bands_) + lon_bands_) % lon_bands_; };

    for (int r = 0;; ++r) {
        const bool all_lons = 2 * r + 1 >= lon_bands_;
        // Rows at the ring's top and bottom edge: every longitude in the ring.
        for (int dl : {-r, r}) {
            const int lb = b + dl;
            if (lb < 0 || lb >= lat_bands_) continue;
            if (all_lons) {
                for (int ob = 0; ob < lon_bands_; ++ob) visit(lb, ob);
            } else {
                for (int dm = -r; dm <= r; ++dm) visit(lb, wrap(c + dm));
            }
            if (r == 0) break;
        }
        // Interior rows: only the two side columns, when they sit at ring distance r.
        if (2 * r <= lon_bands_) {
            for (int dl = -r + 1; dl <= r - 1; ++dl) {
                const int lb = b + dl;
                if (lb < 0 || lb >= lat_bands_) continue;
                visit(lb, wrap(c - r));
                if (2 * r != lon_bands_) visit(lb, wrap(c + r));
            }
        }

        // Lower bound on the distance to any port in a cell outside this ring.
        const int lo_band = b - r;
        const int hi_band = b + r;
        const bool lat_done = lo_band <= 0 && hi_band >= lat_bands_ - 1;
        const bool lon_done = all_lons;
        if (lat_done && lon_done) break;
        const double inf = std::numeric_limits<double>::infinity();
        double lat_gap = inf;
        if (lo_band > 0) lat_gap = std::min(lat_gap, p.lat - (-90.0 + lo_band * lat_step_));
        if (hi_band < lat_bands_ - 1)
            lat_gap = std::min(lat_gap, (-90.0 + (hi_band + 1) * lat_step_) - p.lat);
        const double lat_bound = lat_gap == inf ? inf : kEarthRadiusM * std::max(0.0, lat_gap) * kDeg;

        double lon_bound = inf;
        if (!lon_done) {
            const double west = -180.0 + (c - r) * lon_step_;
            const double east = -180.0 + (c + r + 1) * lon_step_;
            const double gap = std::clamp(std::min(lon - west, east - lon), 0.0, 180.0);
            const double band_lo = std::max(-90.0, -90.0 + std::max(lo_band, 0) * lat_step_);
            const double band_hi =
                std::min(90.0, -90.0 + (std::min(hi_band, lat_bands_ - 1) + 1) * lat_step_);
            const double max_abs_lat = std::max(std::abs(band_lo), std::abs(band_hi));
            const double cos2 = std::max(0.0, std::cos(max_abs_lat * kDeg));
            const double h = std::max(0.0, cos_phi) * cos2 * hav(gap * kDeg);
            lon_bound = 2.0 * kEarthRadiusM * std::asin(std::sqrt(std::clamp(h, 0.0, 1.0)));
        }
        const double bound = std::min(lat_bound, lon_bound) * (1.0 - 1e-12);
        if (best <= bound) break;
    }
    return best;
}

std::vector<double> PortIndex::nearest_distances_m(std::span<const GeoPoint> points) const {
    if (points_.empty()) throw Error(Errc::EmptyPortDatabase, "port index is empty");
    std::vector<double> out(points.size());
    const auto n = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = nearest_distance_m(points[static_cast<std::size_t>(i)]);
    return out;
}

namespace reference {

double nearest_distance_m(std::span<const GeoPoint> ports, const GeoPoint& p) {
    if (ports.empty()) throw Error(Errc::EmptyPortDatabase, "port list is empty");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : ports) best = std::min(best, haversine_m(p, q));
    return best;
}

std::vector<double> nearest_distances_m(std::span<const GeoPoint> ports,
                                        std::span<const GeoPoint> points) {
    std::vector<double> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(nearest_distance_m(ports, p));
    return out;
}

}  // namespace reference

}  // namespace aisgap::geo
